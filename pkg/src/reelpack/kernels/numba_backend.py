"""Jitted kernel implementations.

Each function mirrors its numpy_backend counterpart step for step; the
simulation kernels produce bit-identical integer totals, the value
iteration kernels agree up to floating-point summation order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

POLICY_FF = 0
POLICY_BF = 1
POLICY_INDEX = 2
POLICY_RANDOM = 3
POLICY_TABULAR = 4

_INT_MAX = np.iinfo(np.int64).max


@njit(cache=True, nogil=True)
def _select(reels, x, B, policy_code, h1, action, supp, tab_policy, tab_weights,
            tab_binom, scratch):
    N = reels.shape[0]
    if policy_code == POLICY_RANDOM:
        return action
    if policy_code == POLICY_FF:
        for n in range(N):
            if reels[n] >= x:
                return n
        a = 0
        for n in range(1, N):
            if reels[n] < reels[a]:
                a = n
        return a
    if policy_code == POLICY_BF:
        a = -1
        best = _INT_MAX
        for n in range(N):
            if reels[n] >= x:
                r = reels[n] - x
                if r < best:
                    best = r
                    a = n
        if a >= 0:
            return a
        a = 0
        for n in range(1, N):
            if reels[n] < reels[a]:
                a = n
        return a
    if policy_code == POLICY_INDEX:
        a = 0
        best = np.inf
        for n in range(N):
            w = reels[n]
            if w >= x:
                s = (0.0 + h1[w - x]) - h1[w]
            else:
                s = (w + h1[B - x]) - h1[w]
            if s < best:
                best = s
                a = n
        return a
    # tabular: canonical (sorted-multiset, component) rank -> action position
    for n in range(N):
        scratch[n] = n
    for i in range(1, N):  # stable insertion sort of indices by weight
        j = i
        while j > 0 and reels[scratch[j - 1]] > reels[scratch[j]]:
            scratch[j - 1], scratch[j] = scratch[j], scratch[j - 1]
            j -= 1
    tup = np.int64(0)
    for i in range(N):
        r = np.searchsorted(tab_weights, reels[scratch[i]])
        tup += tab_binom[r + i, i + 1]
    k = np.searchsorted(supp, x)
    pos = tab_policy[tup * supp.shape[0] + k]
    return scratch[pos]


@njit(cache=True, nogil=True)
def simulate_batch(reels, comps, B, policy_code, h1, actions, supp, tab_policy,
                   tab_weights, tab_binom, count):
    R, N = reels.shape
    T = comps.shape[1]
    waste_sum = np.zeros(R, dtype=np.int64)
    repl_sum = np.zeros(R, dtype=np.int64)
    scratch = np.empty(N, dtype=np.int64)
    for r in range(R):
        row = reels[r]
        wsum = np.int64(0)
        rsum = np.int64(0)
        for t in range(T):
            x = comps[r, t]
            act = actions[r, t] if policy_code == POLICY_RANDOM else np.int64(0)
            a = _select(row, x, B, policy_code, h1, act, supp, tab_policy,
                        tab_weights, tab_binom, scratch)
            w = row[a]
            if w >= x:
                row[a] = w - x
            else:
                row[a] = B - x
                if count:
                    wsum += w
                    rsum += 1
        waste_sum[r] = wsum
        repl_sum[r] = rsum
    return waste_sum, repl_sum


@njit(cache=True, nogil=True)
def rvi_control(cst, nxt, p, damping, tol, max_iters):
    M, K, N = cst.shape
    v = np.zeros((M, K), dtype=np.float64)
    lv = np.empty((M, K), dtype=np.float64)
    ev = np.empty(M, dtype=np.float64)
    hi = np.inf
    lo = -np.inf
    for it in range(1, max_iters + 1):
        for t in range(M):
            s = 0.0
            for k in range(K):
                s += v[t, k] * p[k]
            ev[t] = s
        hi = -np.inf
        lo = np.inf
        for t in range(M):
            for k in range(K):
                best = np.inf
                for a in range(N):
                    q = cst[t, k, a] + ev[nxt[t, k, a]]
                    if q < best:
                        best = q
                if damping < 1.0:
                    best = damping * best + (1.0 - damping) * v[t, k]
                lv[t, k] = best
                d = best - v[t, k]
                if d > hi:
                    hi = d
                if d < lo:
                    lo = d
        tmp = v
        v = lv
        lv = tmp
        if hi - lo <= tol:
            return v, 0.5 * (hi + lo), hi - lo, it
    return v, 0.5 * (hi + lo), hi - lo, max_iters


@njit(cache=True, nogil=True)
def rvi_evaluate(cost, indptr, idx, wts, damping, tol, max_iters):
    S = cost.shape[0]
    v = np.zeros(S, dtype=np.float64)
    lv = np.empty(S, dtype=np.float64)
    hi = np.inf
    lo = -np.inf
    for it in range(1, max_iters + 1):
        hi = -np.inf
        lo = np.inf
        for s in range(S):
            acc = 0.0
            for j in range(indptr[s], indptr[s + 1]):
                acc += wts[j] * v[idx[j]]
            val = cost[s] + acc
            if damping < 1.0:
                val = damping * val + (1.0 - damping) * v[s]
            lv[s] = val
            d = val - v[s]
            if d > hi:
                hi = d
            if d < lo:
                lo = d
        tmp = v
        v = lv
        lv = tmp
        if hi - lo <= tol:
            return v, 0.5 * (hi + lo), hi - lo, it
    return v, 0.5 * (hi + lo), hi - lo, max_iters


def greedy_actions(cst, nxt, p, v):
    ev = v @ p
    return (cst + ev[nxt]).argmin(axis=2).astype(np.int64)


def control_residual(cst, nxt, p, v, gain):
    ev = v @ p
    lv = (cst + ev[nxt]).min(axis=2)
    return float(np.abs(lv - gain - v).max())


def evaluate_residual(cost, indptr, idx, wts, v, gain):
    pv = np.add.reduceat(wts * v[idx], indptr[:-1])
    return float(np.abs(cost + pv - gain - v).max())
