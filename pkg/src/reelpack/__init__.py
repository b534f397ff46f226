"""Reel-assignment toolkit: policies, exact solvers, and simulation.

Models a printer farm fed from N filament reels of capacity B grams.
Components with random integer weights arrive one at a time and must be
assigned to a reel immediately; a reel too light for its assignment is
discarded (its remaining weight is the waste) and replaced on the spot.
The package computes assignment policies, evaluates them exactly on small
instances, and estimates long-run average waste by simulation.
"""

from .model import (
    AugmentedState,
    ComponentDistribution,
    InputError,
    ProblemInstance,
    apply_assignment,
    builtin_case,
    enumerate_reachable,
    load_instance,
    step,
)
from .policies import (
    BestFitPolicy,
    ConfigurationError,
    EnumerationError,
    FirstFitPolicy,
    IndexPolicy,
    PolicyDecision,
    RandomPolicy,
    RolloutPolicy,
    TabularPolicy,
    best_fit_select,
    first_fit_select,
    index_select,
    make_policy,
    random_select,
    rollout_select,
)
from .simulator import (
    ComparisonReport,
    ElbowReport,
    SimulationConfig,
    SimulationReport,
    compare,
    elbow,
    simulate,
    sweep_reels,
)
from .solver import (
    BiasTable,
    ConvergenceError,
    EvalResult,
    ExactSolution,
    StateSpaceError,
    bellman_error,
    evaluate_policy_exact,
    solve_exact,
    solve_single_reel,
    verify_decomposition,
)

__version__ = "0.1.0"
