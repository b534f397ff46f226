"""Average-cost solvers: single-reel bias, exact optimality, policy evaluation.

All chains here are solved by relative value iteration with a span-seminorm
stopping rule; normalization (pinning the reference state to zero) happens
only after the final sweep.  Deterministic single-weight distributions make
the chains periodic, so those solves run with a 0.5 damping factor, which
leaves the gain and the bias shape unchanged.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import ComponentDistribution, InputError, ProblemInstance, enumerate_reachable
from .policies import Policy, RandomPolicy, TabularPolicy

__all__ = [
    "ConvergenceError",
    "StateSpaceError",
    "BiasTable",
    "EvalResult",
    "ExactSolution",
    "DecompositionReport",
    "solve_single_reel",
    "solve_exact",
    "evaluate_policy_exact",
    "bellman_error",
    "decomposed_augmented_bias",
    "additive_naive_bias",
    "verify_decomposition",
    "CanonicalSpace",
    "ProductSpace",
    "DEFAULT_MAX_STATES",
]

DEFAULT_MAX_STATES = 2_000_000
MAX_STATES_ENV = "REELPACK_MAX_STATES"

DEFAULT_TOL = 1e-9
SINGLE_REEL_TOL = 1e-10
DETERMINISTIC_DAMPING = 0.5


class ConvergenceError(RuntimeError):
    """Value iteration failed to reach the span tolerance."""

    def __init__(self, message: str, span: float, iterations: int):
        super().__init__(message)
        self.span = span
        self.iterations = iterations


class StateSpaceError(RuntimeError):
    """Enumerated state space exceeds the configured cap."""

    def __init__(self, message: str, state_count: int):
        super().__init__(message)
        self.state_count = state_count


def max_states_cap(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get(MAX_STATES_ENV)
    return int(env) if env else DEFAULT_MAX_STATES


def _damping_for(dist: ComponentDistribution) -> float:
    return DETERMINISTIC_DAMPING if len(dist) == 1 else 1.0


# ---------------------------------------------------------------------------
# single-reel chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BiasTable:
    """Gain and bias of the single-reel chain, h1 indexed by weight 0..B-1.

    h1[reference] is pinned to 0.  `residual` is the largest absolute
    Bellman residual of (gain, h1) under the undamped one-step operator.
    """

    gain_g1: float
    h1: np.ndarray
    residual: float
    reference: int
    capacity_B: int
    weights: tuple[int, ...]
    probs: tuple[float, ...]
    iterations: int

    def matches(self, instance: ProblemInstance) -> bool:
        return (
            self.capacity_B == instance.capacity_B
            and self.weights == instance.dist.weights
            and np.allclose(self.probs, instance.dist.probs, rtol=0, atol=1e-12)
        )


def _single_reel_csr(dist: ComponentDistribution, B: int):
    w = np.arange(B, dtype=np.int64)
    K = len(dist)
    xs = dist.weights_array()
    fits = w[:, None] >= xs[None, :]
    nxt = np.where(fits, w[:, None] - xs[None, :], B - xs[None, :])
    cst = np.where(fits, 0.0, w[:, None].astype(np.float64))
    p = dist.probs_array()
    cost = cst @ p
    indptr = np.arange(B + 1, dtype=np.int64) * K
    idx = nxt.reshape(-1)
    wts = np.tile(p, B)
    return cost, indptr, idx, wts


def solve_single_reel(
    dist: ComponentDistribution,
    B: int,
    tolerance: float = SINGLE_REEL_TOL,
    max_iters: int = 500_000,
    damping: float | None = None,
    reference: int = 0,
) -> BiasTable:
    """Solve the single-reel evaluation equation by relative value iteration.

    Stops when the span of successive value differences is below
    `tolerance`; the gain is the midpoint of the final difference sweep.
    """
    cost, indptr, idx, wts = _single_reel_csr(dist, B)
    tau = _damping_for(dist) if damping is None else damping
    backend = kernels.get_backend()
    v, raw_gain, raw_span, iters = backend.rvi_evaluate(
        cost, indptr, idx, wts, tau, tolerance * tau, max_iters
    )
    if raw_span > tolerance * tau:
        raise ConvergenceError(
            f"single-reel solve did not converge in {max_iters} iterations "
            f"(span {raw_span / tau:.3e} > {tolerance:.1e})",
            span=raw_span / tau,
            iterations=iters,
        )
    gain = raw_gain / tau
    h1 = v - v[reference]
    residual = backend.evaluate_residual(cost, indptr, idx, wts, h1, gain)
    return BiasTable(
        gain_g1=float(gain),
        h1=h1,
        residual=float(residual),
        reference=reference,
        capacity_B=B,
        weights=dist.weights,
        probs=dist.probs,
        iterations=iters,
    )


# ---------------------------------------------------------------------------
# state spaces over the reachable reel-weight set
# ---------------------------------------------------------------------------

def _binom_table(n_max: int, k_max: int) -> np.ndarray:
    t = np.zeros((n_max + 1, k_max + 1), dtype=np.int64)
    t[:, 0] = 1
    for n in range(1, n_max + 1):
        for k in range(1, k_max + 1):
            t[n, k] = t[n - 1, k - 1] + t[n - 1, k]
    return t


class CanonicalSpace:
    """Sorted reel multisets over the reachable weight set, times the support.

    Valid for symmetric dynamics: permuting reels permutes nothing
    observable, so states are canonicalized by sorting weights ascending.
    A multiset of weight ranks (r_0 <= ... <= r_{N-1}) is indexed by its
    combinatorial rank sum(C(r_i + i, i + 1)), giving O(1) lookup.
    """

    def __init__(self, weights: np.ndarray, N: int, dist: ComponentDistribution, B: int):
        self.weights = weights
        self.N = N
        self.B = B
        self.dist = dist
        self.K = len(dist)
        self.supp = dist.weights_array()
        self.probs = dist.probs_array()
        nR = len(weights)
        self.binom = _binom_table(nR + N, N + 1)
        self.n_tuples = int(self.binom[nR + N - 1, N])
        self.state_count = self.n_tuples * self.K
        self._tuples = None

    def tuple_ranks(self) -> np.ndarray:
        """(M, N) array of weight ranks, row i being the multiset with rank i."""
        if self._tuples is None:
            nR = len(self.weights)
            lex = np.array(
                list(itertools.combinations_with_replacement(range(nR), self.N)),
                dtype=np.int64,
            ).reshape(-1, self.N)
            out = np.empty_like(lex)
            out[self.rank_rows(lex)] = lex
            self._tuples = out
        return self._tuples

    def rank_rows(self, ranks: np.ndarray) -> np.ndarray:
        """Multiset rank of each row of an (n, N) array of ascending ranks."""
        offs = np.arange(self.N, dtype=np.int64)
        return self.binom[ranks + offs, offs + 1].sum(axis=1)

    def transition_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Costs (M, K, N) and successor multiset ranks (M, K, N)."""
        tuples = self.tuple_ranks()
        M = tuples.shape[0]
        cst = np.empty((M, self.K, self.N), dtype=np.float64)
        nxt = np.empty((M, self.K, self.N), dtype=np.int64)
        for k in range(self.K):
            x = int(self.supp[k])
            for a in range(self.N):
                wv = self.weights[tuples[:, a]]
                fits = wv >= x
                e = np.where(fits, wv - x, self.B - x)
                cst[:, k, a] = np.where(fits, 0, wv)
                repl = tuples.copy()
                repl[:, a] = np.searchsorted(self.weights, e)
                repl.sort(axis=1)
                nxt[:, k, a] = self.rank_rows(repl)
        return cst, nxt

    def zero_tuple_rank(self) -> int:
        if self.weights[0] != 0:
            raise InputError("canonical space does not contain the all-zero state")
        return 0

    def unrank(self, t: int) -> tuple[int, ...]:
        """Reel weights of the multiset with rank t, ascending."""
        ranks = []
        rem = t
        for j in range(self.N, 0, -1):
            s = j - 1
            while self.binom[s + 1, j] <= rem:
                s += 1
            rem -= self.binom[s, j]
            ranks.append(s - (j - 1))
        ranks.reverse()
        return tuple(int(self.weights[r]) for r in ranks)


class ProductSpace:
    """Ordered reel tuples over the reachable weight set (no symmetry folding)."""

    def __init__(self, weights: np.ndarray, N: int, dist: ComponentDistribution, B: int):
        self.weights = weights
        self.N = N
        self.B = B
        self.dist = dist
        self.K = len(dist)
        self.supp = dist.weights_array()
        self.probs = dist.probs_array()
        self.n_tuples = len(weights) ** N
        self.state_count = self.n_tuples * self.K

    def tuple_ranks(self) -> np.ndarray:
        nR = len(self.weights)
        grids = np.meshgrid(*([np.arange(nR)] * self.N), indexing="ij")
        # reel 1 varies slowest: tuple index = sum(r_i * nR^(N-1-i))
        return np.stack([g.reshape(-1) for g in grids], axis=1).astype(np.int64)

    def reel_matrix(self) -> np.ndarray:
        return self.weights[self.tuple_ranks()]

    def transition_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        ranks = self.tuple_ranks()
        M = ranks.shape[0]
        nR = len(self.weights)
        place = nR ** np.arange(self.N - 1, -1, -1, dtype=np.int64)
        base = ranks @ place
        cst = np.empty((M, self.K, self.N), dtype=np.float64)
        nxt = np.empty((M, self.K, self.N), dtype=np.int64)
        for k in range(self.K):
            x = int(self.supp[k])
            for a in range(self.N):
                wv = self.weights[ranks[:, a]]
                fits = wv >= x
                e = np.where(fits, wv - x, self.B - x)
                cst[:, k, a] = np.where(fits, 0, wv)
                new_rank = np.searchsorted(self.weights, e)
                nxt[:, k, a] = base + (new_rank - ranks[:, a]) * place[a]
        return cst, nxt

    def zero_tuple_rank(self) -> int:
        if self.weights[0] != 0:
            raise InputError("product space does not contain the all-zero state")
        return 0


def build_space(
    instance: ProblemInstance, symmetry: bool = True
) -> CanonicalSpace | ProductSpace:
    R = enumerate_reachable(instance.dist, instance.capacity_B)
    cls = CanonicalSpace if symmetry else ProductSpace
    return cls(R, instance.reel_count_N, instance.dist, instance.capacity_B)


# ---------------------------------------------------------------------------
# exact solution of the assignment MDP
# ---------------------------------------------------------------------------

@dataclass
class ExactSolution:
    gain: float
    state_count: int
    residual: float
    iterations: int
    policy: TabularPolicy | None
    bias: np.ndarray = field(repr=False)
    space: CanonicalSpace | ProductSpace = field(repr=False)


def solve_exact(
    instance: ProblemInstance,
    tolerance: float = DEFAULT_TOL,
    max_states: int | None = None,
    symmetry: bool = True,
    max_iters: int = 200_000,
) -> ExactSolution:
    """Average-cost-optimal gain and greedy policy on the reachable space.

    With symmetry on (the default) states are sorted reel multisets; with
    symmetry off the full ordered product is used and no policy table is
    extracted (that mode exists for cross-checking gains on small
    instances).
    """
    cap = max_states_cap(max_states)
    space = build_space(instance, symmetry=symmetry)
    if space.state_count > cap:
        raise StateSpaceError(
            f"{space.state_count} states exceed the cap of {cap} "
            f"(set {MAX_STATES_ENV} to raise it)",
            state_count=space.state_count,
        )
    cst, nxt = space.transition_arrays()
    tau = _damping_for(instance.dist)
    backend = kernels.get_backend()
    v, raw_gain, raw_span, iters = backend.rvi_control(
        cst, nxt, space.probs, tau, tolerance * tau, max_iters
    )
    if raw_span > tolerance * tau:
        raise ConvergenceError(
            f"exact solve did not converge in {max_iters} iterations "
            f"(span {raw_span / tau:.3e} > {tolerance:.1e})",
            span=raw_span / tau,
            iterations=iters,
        )
    gain = raw_gain / tau
    h = v - v[space.zero_tuple_rank(), 0]
    residual = backend.control_residual(cst, nxt, space.probs, h, gain)
    policy = None
    if symmetry:
        actions = backend.greedy_actions(cst, nxt, space.probs, h)
        policy = TabularPolicy(
            reachable_weights=space.weights,
            support=space.supp,
            binom=space.binom,
            table=actions.reshape(-1),
            capacity_B=instance.capacity_B,
            reel_count_N=instance.reel_count_N,
        )
    return ExactSolution(
        gain=float(gain),
        state_count=space.state_count,
        residual=float(residual),
        iterations=iters,
        policy=policy,
        bias=h,
        space=space,
    )


# ---------------------------------------------------------------------------
# exact policy evaluation (ordered product space)
# ---------------------------------------------------------------------------

@dataclass
class EvalResult:
    """Gain and bias of a fixed policy, with its Bellman residual.

    `states` lists the evaluated states: reel weight rows in `reels`
    paired with component weights in `components` (empty for the naive
    variant, whose states are reel tuples only).
    """

    gain: float
    bellman_residual: float
    iterations: int
    reels: np.ndarray
    components: np.ndarray
    values: np.ndarray

    def value(self, reels, x: int | None = None) -> float:
        key = np.asarray(reels)
        mask = (self.reels == key).all(axis=1)
        if x is not None:
            mask &= self.components == x
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            raise KeyError(f"state {tuple(key)}, x={x} was not evaluated")
        return float(self.values[idx[0]])


def _policy_decisions(space: ProductSpace, policy: Policy) -> np.ndarray:
    """0-based action per augmented state (t, k), in t-major order."""
    reels = space.reel_matrix()
    M = reels.shape[0]
    acts = np.empty((M, space.K), dtype=np.int64)
    for k in range(space.K):
        x = np.full(M, space.supp[k], dtype=np.int64)
        acts[:, k] = policy.decide_batch(reels, x, space.B)
    return acts


def _reachable_tuples(space: ProductSpace, nxt, acts: np.ndarray | None) -> np.ndarray:
    """Tuple indices reachable from the all-zero start under the policy.

    acts is (M, K) for a deterministic policy; None means all actions are
    possible (the random policy).
    """
    M = space.n_tuples
    seen = np.zeros(M, dtype=bool)
    t0 = space.zero_tuple_rank()
    seen[t0] = True
    frontier = np.array([t0], dtype=np.int64)
    while frontier.size:
        if acts is None:
            nt = nxt[frontier].reshape(-1)
        else:
            rows = nxt[frontier]  # (F, K, N)
            ak = acts[frontier]  # (F, K)
            nt = np.take_along_axis(rows, ak[:, :, None], axis=2)[:, :, 0].reshape(-1)
        nt = np.unique(nt)
        new = nt[~seen[nt]]
        seen[new] = True
        frontier = new
    return np.flatnonzero(seen)


def evaluate_policy_exact(
    instance: ProblemInstance,
    policy: Policy,
    variant: str = "augmented",
    tolerance: float = DEFAULT_TOL,
    max_states: int | None = None,
    max_iters: int = 500_000,
    restrict_to_reachable: bool = True,
) -> EvalResult:
    """Exact gain and bias of a policy by value iteration on its chain.

    variant="augmented" evaluates on (reel weights, arriving component)
    states; variant="naive" (random policy only) evaluates on reel weights
    alone, with the component integrated out.  By default the chain is
    restricted to states reachable from the all-zero start.
    """
    space = build_space(instance, symmetry=False)
    cap = max_states_cap(max_states)
    if space.state_count > cap:
        raise StateSpaceError(
            f"{space.state_count} states exceed the cap of {cap}",
            state_count=space.state_count,
        )
    is_random = isinstance(policy, RandomPolicy)
    if variant == "naive" and not is_random:
        raise InputError("the naive (component-blind) variant requires the random policy")
    if variant not in ("naive", "augmented"):
        raise InputError(f"unknown variant {variant!r}")
    policy.prepare(instance)

    cst, nxt = space.transition_arrays()
    acts = None if is_random else _policy_decisions(space, policy)
    if restrict_to_reachable:
        tuples = _reachable_tuples(space, nxt, acts)
    else:
        tuples = np.arange(space.n_tuples, dtype=np.int64)
    tpos = np.full(space.n_tuples, -1, dtype=np.int64)
    tpos[tuples] = np.arange(tuples.size)
    M = tuples.size
    K = space.K
    p = space.probs
    N = space.N

    if variant == "naive":
        # state = reel tuple; one step averages the uniform reel choice and
        # the component draw together
        cost = (cst[tuples] * p[None, :, None]).sum(axis=1).mean(axis=1)
        succ = tpos[nxt[tuples]]  # (M, K, N)
        idx_flat = succ.transpose(0, 2, 1).reshape(-1)  # rows: N groups of K
        wts_flat = np.tile(np.concatenate([p] * N) / N, M)
        indptr = np.arange(M + 1, dtype=np.int64) * (N * K)
        S = M
        state_reels = space.reel_matrix()[tuples]
        state_comps = np.empty(0, dtype=np.int64)
    else:
        S = M * K
        if is_random:
            cost = (cst[tuples].mean(axis=2)).reshape(-1)
            succ = tpos[nxt[tuples]]  # (M, K, N)
            cols = (succ[:, :, :, None] * K + np.arange(K)[None, None, None, :])
            idx_flat = cols.reshape(-1)
            wts_flat = np.tile(np.concatenate([p] * N) / N, S)
            indptr = np.arange(S + 1, dtype=np.int64) * (N * K)
        else:
            ak = acts[tuples]  # (M, K)
            cost = np.take_along_axis(cst[tuples], ak[:, :, None], axis=2)[:, :, 0]
            cost = cost.reshape(-1)
            succ = np.take_along_axis(tpos[nxt[tuples]], ak[:, :, None], axis=2)[:, :, 0]
            cols = succ[:, :, None] * K + np.arange(K)[None, None, :]
            idx_flat = cols.reshape(-1)
            wts_flat = np.tile(p, S)
            indptr = np.arange(S + 1, dtype=np.int64) * K
        state_reels = np.repeat(space.reel_matrix()[tuples], K, axis=0)
        state_comps = np.tile(space.supp, M)

    if (idx_flat < 0).any():
        raise StateSpaceError("policy chain leaves the enumerated state set", S)

    tau = _damping_for(instance.dist)
    backend = kernels.get_backend()
    v, raw_gain, raw_span, iters = backend.rvi_evaluate(
        cost, indptr, idx_flat, wts_flat, tau, tolerance * tau, max_iters
    )
    if raw_span > tolerance * tau:
        raise ConvergenceError(
            f"policy evaluation did not converge in {max_iters} iterations "
            f"(span {raw_span / tau:.3e})",
            span=raw_span / tau,
            iterations=iters,
        )
    gain = raw_gain / tau
    h = v - v[0]
    residual = backend.evaluate_residual(cost, indptr, idx_flat, wts_flat, h, gain)
    return EvalResult(
        gain=float(gain),
        bellman_residual=float(residual),
        iterations=iters,
        reels=state_reels,
        components=state_comps,
        values=h,
    )


# ---------------------------------------------------------------------------
# Bellman error and the additive bias construction
# ---------------------------------------------------------------------------

def additive_naive_bias(space: ProductSpace, h1: np.ndarray) -> np.ndarray:
    """Sum of single-reel biases per tuple: the naive N-reel bias."""
    return h1[space.reel_matrix()].sum(axis=1)


def decomposed_augmented_bias(
    space: ProductSpace, h1: np.ndarray, theta: float = 0.0
) -> np.ndarray:
    """Augmented-state bias assembled from the single-reel bias.

    For each state (w_1..w_N, x):
        mean_n [ c(w_n, x) + h1(e(w_n, x)) + (N - 1) h1(w_n) ] + theta
    laid out t-major then component, matching the augmented evaluation order.
    """
    reels = space.reel_matrix()  # (M, N)
    M, N = reels.shape
    out = np.empty((M, space.K), dtype=np.float64)
    for k in range(space.K):
        x = int(space.supp[k])
        fits = reels >= x
        e = np.where(fits, reels - x, space.B - x)
        c = np.where(fits, 0.0, reels)
        out[:, k] = (c + h1[e] + (N - 1) * h1[reels]).mean(axis=1) + theta
    return out.reshape(-1)


def bellman_error(
    policy: Policy,
    gain: float,
    h: np.ndarray,
    instance: ProblemInstance,
    space: ProductSpace | None = None,
) -> np.ndarray:
    """Componentwise Bellman error c_pi - gain + P_pi h - h on augmented states.

    `h` must be indexed t-major then component over the full product space.
    Zero at a policy's own evaluation; nonpositive when `policy` improves
    on the pair (gain, h).
    """
    if space is None:
        space = build_space(instance, symmetry=False)
    S = space.n_tuples * space.K
    if h.shape[0] != S:
        raise InputError(f"bias has {h.shape[0]} entries, expected {S}")
    cst, nxt = space.transition_arrays()
    p = space.probs
    hv = h.reshape(space.n_tuples, space.K)
    ev = hv @ p  # expected bias over the next component, per tuple
    if isinstance(policy, RandomPolicy):
        err = (cst + ev[nxt]).mean(axis=2).reshape(-1) - gain - h
    else:
        policy.prepare(instance)
        acts = _policy_decisions(space, policy)
        q = cst + ev[nxt]
        err = np.take_along_axis(q, acts[:, :, None], axis=2)[:, :, 0].reshape(-1)
        err = err - gain - h
    return err


@dataclass(frozen=True)
class DecompositionReport:
    """Residuals of the additive bias constructions on one instance."""

    naive_residual: float
    augmented_residual: float
    gain: float
    state_count: int


def verify_decomposition(
    instance: ProblemInstance,
    bias: BiasTable | None = None,
    theta: float = 0.0,
    max_states: int | None = None,
) -> DecompositionReport:
    """Check the sum-of-single-reel-bias solutions on the full product space.

    (a) the naive N-reel equation with h_N = sum h1(w_n) and gain g1;
    (b) the augmented equation with the decomposed bias and the same gain.
    Returns the max absolute residual of each.
    """
    if bias is None:
        bias = solve_single_reel(instance.dist, instance.capacity_B)
    space = build_space(instance, symmetry=False)
    cap = max_states_cap(max_states)
    if space.state_count > cap:
        raise StateSpaceError(
            f"{space.state_count} states exceed the cap of {cap}",
            state_count=space.state_count,
        )
    cst, nxt = space.transition_arrays()
    p = space.probs
    g1 = bias.gain_g1
    h1 = bias.h1

    # (a) naive: one step averages the reel pick and the component draw
    hN = additive_naive_bias(space, h1)
    step_cost = (cst * p[None, :, None]).sum(axis=1).mean(axis=1)
    step_val = (hN[nxt] * p[None, :, None]).sum(axis=1).mean(axis=1)
    naive_res = float(np.abs(step_cost + step_val - g1 - hN).max())

    # (b) augmented: bias over (tuple, component) states
    hhat = decomposed_augmented_bias(space, h1, theta).reshape(space.n_tuples, space.K)
    ev = hhat @ p
    lhs = (cst + ev[nxt]).mean(axis=2)
    aug_res = float(np.abs(lhs - g1 - hhat.reshape(space.n_tuples, space.K)).max())
    return DecompositionReport(
        naive_residual=naive_res,
        augmented_residual=aug_res,
        gain=g1,
        state_count=space.state_count,
    )
