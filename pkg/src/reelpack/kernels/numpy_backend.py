"""Pure-numpy kernel implementations.

Simulation is vectorized across replications (the batch dimension) and
steps sequentially through time, so it stays usable when numba is absent,
at roughly an order of magnitude slower than the jitted backend.  Decision
logic mirrors the numba backend exactly: integer outputs are bit-identical.
"""

from __future__ import annotations

import numpy as np

POLICY_FF = 0
POLICY_BF = 1
POLICY_INDEX = 2
POLICY_RANDOM = 3
POLICY_TABULAR = 4

_INT_MAX = np.iinfo(np.int64).max


def decide_ff(reels: np.ndarray, x: np.ndarray) -> np.ndarray:
    """First fit over rows: lowest index that fits, else least-weight reel."""
    fits = reels >= x[:, None]
    return np.where(fits.any(axis=1), fits.argmax(axis=1), reels.argmin(axis=1))


def decide_bf(reels: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Best fit over rows: smallest residual among fits, else least weight."""
    fits = reels >= x[:, None]
    resid = np.where(fits, reels - x[:, None], _INT_MAX)
    return np.where(fits.any(axis=1), resid.argmin(axis=1), reels.argmin(axis=1))


def decide_index(reels: np.ndarray, x: np.ndarray, B: int, h1: np.ndarray) -> np.ndarray:
    """Index rule over rows: argmin of c(w, x) + h1(e(w, x)) - h1(w)."""
    fits = reels >= x[:, None]
    e = np.where(fits, reels - x[:, None], B - x[:, None])
    c = np.where(fits, 0.0, reels)
    scores = (c + h1[e]) - h1[reels]
    return scores.argmin(axis=1)


def decide_tabular(reels, x, supp, tab_policy, tab_weights, tab_binom):
    """Canonical-space table lookup: sorted-multiset rank plus component index.

    The table stores the position in ascending weight order; the returned
    action is the lowest original index holding that order statistic.
    """
    N = reels.shape[1]
    offsets = np.arange(N, dtype=np.int64)
    order = np.argsort(reels, axis=1, kind="stable")
    srt = np.take_along_axis(reels, order, axis=1)
    ranks = np.searchsorted(tab_weights, srt)
    tup_idx = tab_binom[ranks + offsets, offsets + 1].sum(axis=1)
    k = np.searchsorted(supp, x)
    pos = tab_policy[tup_idx * supp.shape[0] + k]
    return order[np.arange(reels.shape[0]), pos]


def simulate_batch(reels, comps, B, policy_code, h1, actions, supp, tab_policy,
                   tab_weights, tab_binom, count):
    """Advance every replication through one chunk of component arrivals.

    reels (R, N) is mutated in place.  Returns (waste, replacements) summed
    per replication; both stay zero when count is False (warm-up).
    """
    R = reels.shape[0]
    T = comps.shape[1]
    waste_sum = np.zeros(R, dtype=np.int64)
    repl_sum = np.zeros(R, dtype=np.int64)
    rows = np.arange(R)
    for t in range(T):
        x = comps[:, t]
        if policy_code == POLICY_FF:
            a = decide_ff(reels, x)
        elif policy_code == POLICY_BF:
            a = decide_bf(reels, x)
        elif policy_code == POLICY_INDEX:
            a = decide_index(reels, x, B, h1)
        elif policy_code == POLICY_RANDOM:
            a = actions[:, t]
        elif policy_code == POLICY_TABULAR:
            a = decide_tabular(reels, x, supp, tab_policy, tab_weights, tab_binom)
        else:
            raise ValueError(f"unknown policy code {policy_code}")
        w = reels[rows, a]
        repl = w < x
        reels[rows, a] = np.where(repl, B - x, w - x)
        if count:
            waste_sum += np.where(repl, w, 0)
            repl_sum += repl
    return waste_sum, repl_sum


def rvi_control(cst, nxt, p, damping, tol, max_iters):
    """Relative value iteration for the optimality operator.

    cst/nxt have shape (M, K, N): state = (reel multiset, arriving
    component), axis 2 ranges over actions.  Transitions land in a multiset
    whose next component is drawn from p, so the expected continuation is
    EV = v @ p.  Damping tau < 1 averages each sweep with the previous
    iterate (the per-sweep difference then approaches tau times the gain;
    callers rescale).  Normalization is left to the caller, after
    convergence.

    Returns (v, gain_midpoint, span, iters); span > tol means no
    convergence within max_iters.
    """
    M, K, _ = cst.shape
    v = np.zeros((M, K), dtype=np.float64)
    hi = np.inf
    lo = -np.inf
    for it in range(1, max_iters + 1):
        ev = v @ p
        lv = (cst + ev[nxt]).min(axis=2)
        if damping < 1.0:
            lv *= damping
            lv += (1.0 - damping) * v
        delta = lv - v
        hi = delta.max()
        lo = delta.min()
        v = lv
        if hi - lo <= tol:
            return v, 0.5 * (hi + lo), hi - lo, it
    return v, 0.5 * (hi + lo), hi - lo, max_iters


def greedy_actions(cst, nxt, p, v):
    """Argmin actions of the (undamped) optimality operator at v."""
    ev = v @ p
    return (cst + ev[nxt]).argmin(axis=2).astype(np.int64)


def control_residual(cst, nxt, p, v, gain):
    """Max absolute optimality-equation residual at (gain, v)."""
    ev = v @ p
    lv = (cst + ev[nxt]).min(axis=2)
    return float(np.abs(lv - gain - v).max())


def rvi_evaluate(cost, indptr, idx, wts, damping, tol, max_iters):
    """Relative value iteration for a fixed-policy chain in CSR form.

    One sweep computes Lv = cost + W v with W the (row-stochastic)
    transition matrix.  Same damping and stopping contract as rvi_control.
    """
    S = cost.shape[0]
    v = np.zeros(S, dtype=np.float64)
    hi = np.inf
    lo = -np.inf
    for it in range(1, max_iters + 1):
        pv = np.add.reduceat(wts * v[idx], indptr[:-1])
        lv = cost + pv
        if damping < 1.0:
            lv *= damping
            lv += (1.0 - damping) * v
        delta = lv - v
        hi = delta.max()
        lo = delta.min()
        v = lv
        if hi - lo <= tol:
            return v, 0.5 * (hi + lo), hi - lo, it
    return v, 0.5 * (hi + lo), hi - lo, max_iters


def evaluate_residual(cost, indptr, idx, wts, v, gain):
    """Max absolute Bellman residual of (gain, v) on the fixed-policy chain."""
    pv = np.add.reduceat(wts * v[idx], indptr[:-1])
    return float(np.abs(cost + pv - gain - v).max())
