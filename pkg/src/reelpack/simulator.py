"""Monte-Carlo estimation of long-run average waste per component.

Component streams are pre-generated per replication from seeds spawned off
the master seed, so replications are order-independent and all policies
compared under one seed see identical arrivals (common random numbers).
Waste is accumulated only after the warm-up period.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .model import AugmentedState, InputError, ProblemInstance, apply_assignment
from .policies import Policy

__all__ = [
    "SimulationConfig",
    "SimulationReport",
    "ComparisonReport",
    "ElbowReport",
    "simulate",
    "compare",
    "sweep_reels",
    "elbow",
]

DEFAULT_HORIZON_FLOOR = 1_000_000
CHUNK = 1 << 16


@dataclass(frozen=True)
class SimulationConfig:
    """Replication layout; horizon None means max(10^6, 3 N B / E[X])."""

    horizon: int | None = None
    warmup: int = 300
    replications: int = 30
    seed: int = 42
    initial_reels: tuple[int, ...] | str = "zeros"
    crn: bool = True
    threads: int | None = None

    def resolved_horizon(self, instance: ProblemInstance) -> int:
        floor = math.ceil(3 * instance.reel_count_N * instance.fit_ratio)
        h = self.horizon if self.horizon is not None else max(DEFAULT_HORIZON_FLOOR, floor)
        if h <= self.warmup:
            raise InputError(f"horizon {h} must exceed warmup {self.warmup}")
        if self.warmup < 0 or self.replications < 1:
            raise InputError("need warmup >= 0 and replications >= 1")
        return h

    def start_weights(self, instance: ProblemInstance) -> np.ndarray:
        if isinstance(self.initial_reels, str):
            if self.initial_reels != "zeros":
                raise InputError(f"unknown initial_reels {self.initial_reels!r}")
            return np.zeros(instance.reel_count_N, dtype=np.int64)
        w = np.asarray(self.initial_reels, dtype=np.int64)
        if w.shape != (instance.reel_count_N,):
            raise InputError(f"initial_reels must have length {instance.reel_count_N}")
        if (w < 0).any() or (w >= instance.capacity_B).any():
            raise InputError("initial reel weights must lie in 0..B-1")
        return w


@dataclass(frozen=True)
class SimulationReport:
    """Estimated average waste per component with replication statistics."""

    instance: str
    reel_count_N: int
    policy: str
    mean_waste_per_component: float
    std_error: float
    ci95_halfwidth: float
    per_replication_means: tuple[float, ...]
    total_components: int
    total_waste: int
    replacement_count: int
    horizon: int
    warmup: int
    replications: int
    seed: int


@dataclass(frozen=True)
class ComparisonReport:
    """Per-policy reports plus paired mean differences on shared streams."""

    reports: tuple[SimulationReport, ...]
    diffs: tuple[tuple[str, str, float, float, float], ...]


def _component_chunk(rng, dist_weights, cum_probs, size) -> np.ndarray:
    u = rng.random(size)
    return dist_weights[np.searchsorted(cum_probs, u, side="right")]


def _run_kernel_reps(instance, policy, config, rep_ids, comp_seqs, act_seqs, horizon):
    """Advance a group of replications in lockstep through the kernel."""
    backend = kernels.get_backend()
    args = policy.kernel_args(instance)
    B = instance.capacity_B
    N = instance.reel_count_N
    dist_w = instance.dist.weights_array()
    cum = np.cumsum(instance.dist.probs_array())
    R = len(rep_ids)
    reels = np.tile(config.start_weights(instance), (R, 1))
    crngs = [np.random.Generator(np.random.PCG64(comp_seqs[r])) for r in rep_ids]
    is_random = args["policy_code"] == kernels.POLICY_RANDOM
    arngs = [np.random.Generator(np.random.PCG64(act_seqs[r])) for r in rep_ids]
    waste = np.zeros(R, dtype=np.int64)
    repl = np.zeros(R, dtype=np.int64)
    done = 0
    while done < horizon:
        size = min(CHUNK, horizon - done)
        comps = np.empty((R, size), dtype=np.int64)
        for i, rng in enumerate(crngs):
            comps[i] = _component_chunk(rng, dist_w, cum, size)
        if is_random:
            actions = np.empty((R, size), dtype=np.int64)
            for i, rng in enumerate(arngs):
                actions[i] = rng.integers(0, N, size=size, dtype=np.int64)
        else:
            actions = np.zeros((R, 0), dtype=np.int64)
        # split the chunk at the warm-up boundary so only counted steps tally
        cut = min(max(config.warmup - done, 0), size)
        for lo, hi, count in ((0, cut, False), (cut, size, True)):
            if hi <= lo:
                continue
            w, c = backend.simulate_batch(
                reels, comps[:, lo:hi], B, args["policy_code"], args["h1"],
                actions[:, lo:hi] if is_random else actions,
                args["supp"], args["tab_policy"], args["tab_weights"],
                args["tab_binom"], count,
            )
            if count:
                waste += w
                repl += c
        done += size
    return waste, repl


def _run_python_reps(instance, policy, config, rep_ids, comp_seqs, act_seqs, horizon):
    """Per-step driver for policies without a kernel code (rollout)."""
    B = instance.capacity_B
    dist_w = instance.dist.weights_array()
    cum = np.cumsum(instance.dist.probs_array())
    waste = np.zeros(len(rep_ids), dtype=np.int64)
    repl = np.zeros(len(rep_ids), dtype=np.int64)
    for i, r in enumerate(rep_ids):
        crng = np.random.Generator(np.random.PCG64(comp_seqs[r]))
        arng = np.random.Generator(np.random.PCG64(act_seqs[r]))
        comps = _component_chunk(crng, dist_w, cum, horizon)
        reels = config.start_weights(instance)
        for t in range(horizon):
            x = int(comps[t])
            state = AugmentedState(tuple(reels), x)
            choice = policy.select(state, instance, arng)
            a = choice.reel_index - 1
            w_before = int(reels[a])
            w_next, w_cost = apply_assignment(w_before, x, B)
            reels[a] = w_next
            if t >= config.warmup:
                waste[i] += w_cost
                repl[i] += int(w_before < x)
    return waste, repl


def simulate(
    instance: ProblemInstance,
    policy: Policy,
    config: SimulationConfig | None = None,
    _stream_key: int = 0,
) -> SimulationReport:
    """Estimate the policy's long-run average waste per component.

    Deterministic given (seed, config, policy, instance): streams derive
    from the seed alone, so identical runs produce bit-identical totals.
    """
    config = config or SimulationConfig()
    horizon = config.resolved_horizon(instance)
    policy.prepare(instance)
    root = np.random.SeedSequence((config.seed, _stream_key))
    comp_root, act_root = root.spawn(2)
    comp_seqs = comp_root.spawn(config.replications)
    act_seqs = act_root.spawn(config.replications)

    reps = config.replications
    threads = config.threads or os.cpu_count() or 1
    threads = max(1, min(threads, reps))
    runner = _run_kernel_reps if policy.kernel_code is not None else _run_python_reps
    groups = [list(range(reps))[g::threads] for g in range(threads)]
    groups = [g for g in groups if g]
    waste = np.zeros(reps, dtype=np.int64)
    repl = np.zeros(reps, dtype=np.int64)

    def run_group(ids):
        return ids, runner(instance, policy, config, ids, comp_seqs, act_seqs, horizon)

    if len(groups) == 1:
        results = [run_group(groups[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(groups)) as pool:
            results = list(pool.map(run_group, groups))
    for ids, (w, c) in results:
        waste[ids] = w
        repl[ids] = c

    per_rep = horizon - config.warmup
    means = waste / per_rep
    total_waste = int(waste.sum())
    total_components = reps * per_rep
    mean = total_waste / total_components
    stderr = float(means.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return SimulationReport(
        instance=instance.name,
        reel_count_N=instance.reel_count_N,
        policy=policy.name,
        mean_waste_per_component=mean,
        std_error=stderr,
        ci95_halfwidth=1.96 * stderr,
        per_replication_means=tuple(float(m) for m in means),
        total_components=total_components,
        total_waste=total_waste,
        replacement_count=int(repl.sum()),
        horizon=horizon,
        warmup=config.warmup,
        replications=reps,
        seed=config.seed,
    )


def compare(
    instance: ProblemInstance,
    policies: list[Policy],
    config: SimulationConfig | None = None,
) -> ComparisonReport:
    """Simulate several policies and report paired mean differences.

    With crn=True (the default) every policy sees identical component
    streams, so differences are paired per replication.
    """
    config = config or SimulationConfig()
    if len(policies) < 2:
        raise InputError("compare needs at least two policies")
    reports = []
    for i, pol in enumerate(policies):
        key = 0 if config.crn else i
        reports.append(simulate(instance, pol, config, _stream_key=key))
    labels = []
    seen: dict[str, int] = {}
    for r in reports:
        n = seen.get(r.policy, 0)
        seen[r.policy] = n + 1
        labels.append(r.policy if n == 0 else f"{r.policy}#{n + 1}")
    diffs = []
    for i in range(len(reports)):
        for j in range(i + 1, len(reports)):
            a = np.asarray(reports[i].per_replication_means)
            b = np.asarray(reports[j].per_replication_means)
            d = a - b
            stderr = float(d.std(ddof=1) / math.sqrt(len(d))) if len(d) > 1 else 0.0
            diffs.append((labels[i], labels[j], float(d.mean()), stderr, 1.96 * stderr))
    return ComparisonReport(reports=tuple(reports), diffs=tuple(diffs))


def sweep_reels(
    instance: ProblemInstance,
    policy: Policy,
    n_list: list[int],
    config: SimulationConfig | None = None,
) -> dict[int, SimulationReport]:
    """Simulate the policy across reel counts, one report per N.

    The horizon is raised to at least 3 N B / E[X] so every reel sees a
    couple of expected replacements even at large N.
    """
    config = config or SimulationConfig()
    out = {}
    for n in n_list:
        if n < 1:
            raise InputError(f"reel count {n} must be >= 1")
        inst = instance.with_reels(n)
        h = config.resolved_horizon(inst)
        floor = math.ceil(3 * n * inst.fit_ratio)
        cfg = replace(config, horizon=max(h, floor))
        out[n] = simulate(inst, policy, cfg)
    return out


@dataclass(frozen=True)
class ElbowReport:
    """Second discrete differences of a waste curve and their peak."""

    second_differences: tuple[tuple[int, float], ...]
    argmax_n: int

    def as_dict(self) -> dict[int, float]:
        return dict(self.second_differences)


def elbow(curve: dict[int, float]) -> ElbowReport:
    """Second discrete difference f(N+1) - 2 f(N) + f(N-1) at interior points.

    Only N values whose neighbors N-1 and N+1 are both present contribute;
    the report carries the N maximizing the difference.
    """
    if len(curve) < 3:
        raise InputError("elbow needs a curve over at least 3 reel counts")
    pts = []
    for n in sorted(curve):
        if (n - 1) in curve and (n + 1) in curve:
            d2 = curve[n + 1] - 2.0 * curve[n] + curve[n - 1]
            pts.append((n, float(d2)))
    if not pts:
        raise InputError("elbow needs at least 3 consecutive reel counts")
    best = max(pts, key=lambda t: t[1])[0]
    return ElbowReport(second_differences=tuple(pts), argmax_n=best)
