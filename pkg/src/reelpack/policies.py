"""Assignment policies: random, first fit, best fit, index, rollout, tabular.

Each policy answers one question: given reel weights and an arriving
component, which reel takes the component.  Deterministic ties always
resolve to the lowest reel index.  Policies are stateless; Random and
Rollout take an explicit random generator so replications can run in
parallel on independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernels import numpy_backend as _np_rules
from .model import AugmentedState, InputError, ProblemInstance, apply_assignment

__all__ = [
    "ConfigurationError",
    "EnumerationError",
    "PolicyDecision",
    "Policy",
    "RandomPolicy",
    "FirstFitPolicy",
    "BestFitPolicy",
    "IndexPolicy",
    "RolloutPolicy",
    "TabularPolicy",
    "random_select",
    "first_fit_select",
    "best_fit_select",
    "index_select",
    "rollout_select",
    "make_policy",
    "POLICY_NAMES",
]


class ConfigurationError(ValueError):
    """Policy resources do not match the instance they are used with."""


class EnumerationError(KeyError):
    """A tabular policy was asked about a state outside its enumeration."""


@dataclass(frozen=True)
class PolicyDecision:
    """Chosen reel (1-based) and the waste that assignment incurs."""

    reel_index: int
    immediate_waste: int
    score_per_reel: tuple[float, ...] | None = None


def _decision(reels, x: int, B: int, a: int, scores=None) -> PolicyDecision:
    _, waste = apply_assignment(reels[a], x, B)
    return PolicyDecision(a + 1, waste, None if scores is None else tuple(scores))


class Policy:
    """Base interface; subclasses fill in batch decisions over state rows."""

    name = "policy"
    kernel_code: int | None = None

    def prepare(self, instance: ProblemInstance) -> None:
        """Validate resources against the instance; no-op by default."""

    def select(self, state: AugmentedState, instance: ProblemInstance,
               rng: np.random.Generator | None = None) -> PolicyDecision:
        reels = np.asarray(state.reels, dtype=np.int64)[None, :]
        x = np.asarray([state.component], dtype=np.int64)
        a = int(self.decide_batch(reels, x, instance.capacity_B, rng)[0])
        return _decision(state.reels, state.component, instance.capacity_B, a)

    def decide_batch(self, reels: np.ndarray, x: np.ndarray, B: int,
                     rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def kernel_args(self, instance: ProblemInstance) -> dict:
        """Arrays the simulation kernels need, keyed by kernel parameter."""
        return {
            "policy_code": self.kernel_code,
            "h1": np.zeros(1, dtype=np.float64),
            "supp": np.zeros(0, dtype=np.int64),
            "tab_policy": np.zeros(0, dtype=np.int64),
            "tab_weights": np.zeros(0, dtype=np.int64),
            "tab_binom": np.zeros((1, 1), dtype=np.int64),
        }


class RandomPolicy(Policy):
    """Uniform reel choice from the supplied stream."""

    name = "random"
    kernel_code = kernels.POLICY_RANDOM

    def decide_batch(self, reels, x, B, rng=None):
        if rng is None:
            raise InputError("the random policy needs an explicit generator")
        return rng.integers(0, reels.shape[1], size=reels.shape[0], dtype=np.int64)


class FirstFitPolicy(Policy):
    """Lowest-index reel that fits; otherwise the least-waste replacement."""

    name = "ff"
    kernel_code = kernels.POLICY_FF

    def decide_batch(self, reels, x, B, rng=None):
        return _np_rules.decide_ff(reels, x)


class BestFitPolicy(Policy):
    """Feasible reel with the smallest residual; least-waste replacement else."""

    name = "bf"
    kernel_code = kernels.POLICY_BF

    def decide_batch(self, reels, x, B, rng=None):
        return _np_rules.decide_bf(reels, x)


class IndexPolicy(Policy):
    """Reel minimizing immediate waste plus the single-reel bias increment.

    Scores each reel with c(w, x) + h1(e(w, x)) - h1(w) and takes the
    argmin; h1 comes from a BiasTable solved for the same capacity and
    component distribution.
    """

    name = "index"
    kernel_code = kernels.POLICY_INDEX

    def __init__(self, bias):
        self.bias = bias

    def prepare(self, instance):
        if not self.bias.matches(instance):
            raise ConfigurationError(
                "bias table was solved for a different capacity or distribution"
            )

    def decide_batch(self, reels, x, B, rng=None):
        return _np_rules.decide_index(reels, x, B, self.bias.h1)

    def select(self, state, instance, rng=None):
        return index_select(state, self.bias)

    def kernel_args(self, instance):
        args = super().kernel_args(instance)
        args["h1"] = self.bias.h1
        return args


class TabularPolicy(Policy):
    """Policy table over canonical (sorted reel multiset, component) states.

    The table stores a position in the ascending weight order; the actual
    reel is the lowest-index reel holding that order statistic.
    """

    name = "exact"
    kernel_code = kernels.POLICY_TABULAR

    def __init__(self, reachable_weights, support, binom, table, capacity_B,
                 reel_count_N):
        self.reachable_weights = np.asarray(reachable_weights, dtype=np.int64)
        self.support = np.asarray(support, dtype=np.int64)
        self.binom = np.asarray(binom, dtype=np.int64)
        self.table = np.asarray(table, dtype=np.int64)
        self.capacity_B = capacity_B
        self.reel_count_N = reel_count_N

    def prepare(self, instance):
        if (
            instance.capacity_B != self.capacity_B
            or instance.reel_count_N != self.reel_count_N
            or len(instance.dist) != len(self.support)
            or (instance.dist.weights_array() != self.support).any()
        ):
            raise ConfigurationError("policy table was solved for a different instance")

    def _check_states(self, reels, x):
        r = np.searchsorted(self.reachable_weights, reels)
        r = np.minimum(r, len(self.reachable_weights) - 1)
        bad = self.reachable_weights[r] != reels
        if bad.any():
            w = reels[bad.any(axis=1)][0]
            raise EnumerationError(f"reel weights {tuple(w)} outside the enumerated set")
        k = np.searchsorted(self.support, x)
        k = np.minimum(k, len(self.support) - 1)
        if (self.support[k] != x).any():
            raise EnumerationError(f"component weight outside the support: {x}")

    def decide_batch(self, reels, x, B, rng=None):
        self._check_states(reels, x)
        return _np_rules.decide_tabular(
            reels, x, self.support, self.table, self.reachable_weights, self.binom
        )

    def kernel_args(self, instance):
        args = super().kernel_args(instance)
        args["supp"] = self.support
        args["tab_policy"] = self.table
        args["tab_weights"] = self.reachable_weights
        args["tab_binom"] = self.binom
        return args


class RolloutPolicy(Policy):
    """One-step lookahead scored by simulated continuations of a base policy.

    For each candidate reel the immediate waste plus the mean total waste
    of `rollouts` continuations of `horizon` steps under the base policy is
    estimated; continuations share common random numbers across candidates.
    """

    name = "rollout"
    kernel_code = None

    def __init__(self, base: Policy, rollouts: int = 32, horizon: int = 50):
        if rollouts < 1 or horizon < 0:
            raise InputError("rollout needs rollouts >= 1 and horizon >= 0")
        self.base = base
        self.rollouts = rollouts
        self.horizon = horizon

    def prepare(self, instance):
        self.base.prepare(instance)

    def select(self, state, instance, rng=None):
        if rng is None:
            raise InputError("the rollout policy needs an explicit generator")
        return rollout_select(
            state, instance, self.base, self.rollouts, self.horizon, rng
        )

    def decide_batch(self, reels, x, B, rng=None):
        raise InputError("rollout decisions are simulation-driven; use select()")


def random_select(state: AugmentedState, rng: np.random.Generator) -> PolicyDecision:
    """Uniform choice over reels, drawn from the supplied stream."""
    n = len(state.reels)
    a = int(rng.integers(0, n))
    w = state.reels[a]
    return PolicyDecision(a + 1, state.reels[a] if w < state.component else 0)


def first_fit_select(state: AugmentedState) -> PolicyDecision:
    x = state.component
    for n, w in enumerate(state.reels):
        if w >= x:
            return PolicyDecision(n + 1, 0)
    a = int(np.argmin(state.reels))
    return PolicyDecision(a + 1, state.reels[a])


def best_fit_select(state: AugmentedState) -> PolicyDecision:
    x = state.component
    best, a = None, None
    for n, w in enumerate(state.reels):
        if w >= x and (best is None or w - x < best):
            best, a = w - x, n
    if a is not None:
        return PolicyDecision(a + 1, 0)
    a = int(np.argmin(state.reels))
    return PolicyDecision(a + 1, state.reels[a])


def index_select(state: AugmentedState, bias) -> PolicyDecision:
    """Argmin of c(w_n, x) + h1(e(w_n, x)) - h1(w_n) over reels."""
    B = bias.capacity_B
    x = state.component
    if not 1 <= x <= B:
        raise InputError(f"component weight {x} outside 1..{B}")
    scores = []
    for w in state.reels:
        e, c = apply_assignment(w, x, B)
        scores.append(c + bias.h1[e] - bias.h1[w])
    a = int(np.argmin(scores))
    _, waste = apply_assignment(state.reels[a], x, B)
    return PolicyDecision(a + 1, waste, tuple(float(s) for s in scores))


def rollout_select(
    state: AugmentedState,
    instance: ProblemInstance,
    base_policy: Policy,
    rollouts: int,
    horizon: int,
    rng: np.random.Generator,
) -> PolicyDecision:
    """Pick the reel whose one-step-plus-simulated-future waste is least.

    All candidate actions are scored on the same continuation component
    streams; with horizon 0 this degenerates to the myopic argmin of
    immediate waste.
    """
    B = instance.capacity_B
    x = state.component
    N = len(state.reels)
    dist = instance.dist
    base_policy.prepare(instance)
    if horizon == 0:
        wastes = [apply_assignment(w, x, B)[1] for w in state.reels]
        a = int(np.argmin(wastes))
        return PolicyDecision(a + 1, wastes[a], tuple(float(w) for w in wastes))

    cum = np.cumsum(dist.probs_array())
    comps = dist.weights_array()[
        np.searchsorted(cum, rng.random((rollouts, horizon)), side="right")
    ].astype(np.int64)
    if isinstance(base_policy, RandomPolicy):
        actions = rng.integers(0, N, size=(rollouts, horizon), dtype=np.int64)
    else:
        actions = np.zeros((rollouts, 0), dtype=np.int64)

    backend = kernels.get_backend()
    args = base_policy.kernel_args(instance)
    scores = np.empty(N, dtype=np.float64)
    for a in range(N):
        w_next, waste = apply_assignment(state.reels[a], x, B)
        reels = np.asarray(state.reels, dtype=np.int64)[None, :].repeat(rollouts, axis=0)
        reels[:, a] = w_next
        totals, _ = backend.simulate_batch(
            reels, comps, B, args["policy_code"], args["h1"], actions,
            args["supp"], args["tab_policy"], args["tab_weights"],
            args["tab_binom"], True,
        )
        scores[a] = waste + totals.mean()
    a = int(np.argmin(scores))
    _, waste = apply_assignment(state.reels[a], x, B)
    return PolicyDecision(a + 1, waste, tuple(scores))


POLICY_NAMES = ("random", "ff", "bf", "index", "rollout", "exact")


def make_policy(
    name: str,
    bias=None,
    exact_policy: TabularPolicy | None = None,
    rollout_base: Policy | None = None,
    rollouts: int = 32,
    rollout_horizon: int = 50,
) -> Policy:
    """Construct a policy by CLI name, wiring in prepared resources."""
    if name == "random":
        return RandomPolicy()
    if name == "ff":
        return FirstFitPolicy()
    if name == "bf":
        return BestFitPolicy()
    if name == "index":
        if bias is None:
            raise ConfigurationError("index policy needs a solved bias table")
        return IndexPolicy(bias)
    if name == "rollout":
        if rollout_base is None:
            raise ConfigurationError("rollout policy needs a base policy")
        return RolloutPolicy(rollout_base, rollouts, rollout_horizon)
    if name == "exact":
        if exact_policy is None:
            raise ConfigurationError("exact policy needs a solved policy table")
        return exact_policy
    raise InputError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
