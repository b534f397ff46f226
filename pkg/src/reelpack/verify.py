"""Structural checks of the single-reel decomposition on small instances.

Every check has an analytic reason to hold exactly: gains of the
component-aware and component-blind random-policy chains coincide and
equal the single-reel gain; sums of single-reel biases solve the
multi-reel evaluation equations; and the index rule is a one-step
improvement over random assignment, visible both in its gain and in the
sign of its Bellman error against the random policy's evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ComponentDistribution, ProblemInstance
from .policies import IndexPolicy, RandomPolicy
from .solver import (
    bellman_error,
    build_space,
    decomposed_augmented_bias,
    evaluate_policy_exact,
    solve_single_reel,
    verify_decomposition,
)

__all__ = ["CheckResult", "battery_instances", "run_verification"]

GAIN_TOL = 1e-8
RESIDUAL_TOL = 1e-8
IMPROVE_TOL = 1e-9
THETA_SWEEP = (17.5, -3.0)
SOLVE_TOL = 1e-12

# (capacity, weights, probabilities): kept tiny so exact evaluation of all
# chains stays well under a second
BATTERY = (
    (8, (3, 5), (0.5, 0.5)),
    (10, (3, 4), (0.6, 0.4)),
    (10, (3,), (1.0,)),
    (12, (4, 5, 7), (0.3, 0.3, 0.4)),
    (15, (4, 6, 9), (0.2, 0.5, 0.3)),
)


@dataclass(frozen=True)
class CheckResult:
    instance: str
    reels: int
    name: str
    value: float
    bound: float
    passed: bool

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"[{status}] {self.instance} N={self.reels} {self.name}: "
            f"{self.value:.3e} (bound {self.bound:.1e})"
        )


def battery_instances() -> list[ProblemInstance]:
    out = []
    for B, ws, ps in BATTERY:
        dist = ComponentDistribution(list(ws), list(ps))
        out.append(ProblemInstance(B, 1, dist, name=f"b{B}-" + "-".join(map(str, ws))))
    return out


def run_verification(
    instances: list[ProblemInstance] | None = None,
    n_list: tuple[int, ...] = (1, 2, 3),
) -> list[CheckResult]:
    """Run every structural check over the battery; returns one result each."""
    results = []
    for base in instances if instances is not None else battery_instances():
        bias = solve_single_reel(base.dist, base.capacity_B, tolerance=SOLVE_TOL)
        rnd = RandomPolicy()
        for n in n_list:
            inst = base.with_reels(n)
            tag = inst.name

            def check(name, value, bound):
                results.append(
                    CheckResult(tag, n, name, float(value), bound, bool(value <= bound))
                )

            ev_naive = evaluate_policy_exact(
                inst, rnd, variant="naive", tolerance=SOLVE_TOL
            )
            ev_aug = evaluate_policy_exact(
                inst, rnd, variant="augmented", tolerance=SOLVE_TOL
            )
            check("gain(augmented)==gain(naive)", abs(ev_aug.gain - ev_naive.gain), GAIN_TOL)
            check("gain(naive)==single-reel gain", abs(ev_naive.gain - bias.gain_g1), GAIN_TOL)

            rep = verify_decomposition(inst, bias)
            check("additive naive bias residual", rep.naive_residual, RESIDUAL_TOL)
            check("decomposed augmented bias residual", rep.augmented_residual, RESIDUAL_TOL)
            theta_spread = max(
                abs(verify_decomposition(inst, bias, theta=t).augmented_residual
                    - rep.augmented_residual)
                for t in THETA_SWEEP
            )
            check("residual invariant to bias offset", theta_spread, 1e-10)

            space = build_space(inst, symmetry=False)
            hhat = decomposed_augmented_bias(space, bias.h1)
            own = bellman_error(rnd, bias.gain_g1, hhat, inst, space)
            check("random policy Bellman error at own eval", np.abs(own).max(), RESIDUAL_TOL)

            idx = IndexPolicy(bias)
            err = bellman_error(idx, bias.gain_g1, hhat, inst, space)
            check("index policy Bellman error nonpositive", err.max(), IMPROVE_TOL)

            ev_idx = evaluate_policy_exact(inst, idx, tolerance=SOLVE_TOL)
            check("gain(index) <= gain(random)", ev_idx.gain - ev_naive.gain, IMPROVE_TOL)
    return results
