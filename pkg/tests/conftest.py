import pytest

from reelpack.model import ComponentDistribution, ProblemInstance
from reelpack.solver import solve_single_reel


@pytest.fixture(scope="session")
def tiny_instance():
    # B=10 with weights {3, 4}: 10 reachable reel weights, all chains aperiodic
    return ProblemInstance(10, 2, ComponentDistribution([3, 4], [0.6, 0.4]), "tiny")


@pytest.fixture(scope="session")
def tiny_bias(tiny_instance):
    return solve_single_reel(
        tiny_instance.dist, tiny_instance.capacity_B, tolerance=1e-12
    )
