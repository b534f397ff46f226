"""Benchmark the jitted kernels against the pure-numpy fallback.

Runs the simulation kernel and the exact-solver sweep on built-in cases
under both backends and prints per-backend timings.  Invoke as

    python benchmarks/bench_kernels.py [--horizon 200000] [--reps 8]
"""

import argparse
import os
import time


def time_simulate(instance, policy, horizon, reps):
    from reelpack.simulator import SimulationConfig, simulate

    cfg = SimulationConfig(horizon=horizon, warmup=300, replications=reps, seed=7,
                           threads=1)
    t0 = time.perf_counter()
    rep = simulate(instance, policy, cfg)
    return time.perf_counter() - t0, rep.mean_waste_per_component


def time_exact(instance):
    from reelpack.solver import solve_exact

    t0 = time.perf_counter()
    sol = solve_exact(instance)
    return time.perf_counter() - t0, sol.gain


def run(backend, horizon, reps):
    os.environ["REELPACK_BACKEND"] = backend
    import reelpack.kernels as kernels

    assert kernels.active_backend_name() == backend
    from reelpack.model import builtin_case
    from reelpack.policies import BestFitPolicy, FirstFitPolicy, IndexPolicy
    from reelpack.solver import solve_single_reel

    inst = builtin_case(2, reels=4)
    bias = solve_single_reel(inst.dist, inst.capacity_B)
    rows = []
    for policy in (FirstFitPolicy(), BestFitPolicy(), IndexPolicy(bias)):
        dt, mean = time_simulate(inst, policy, horizon, reps)
        rows.append((f"simulate {policy.name} (case2 N=4, {reps}x{horizon})", dt, mean))
    dt, gain = time_exact(builtin_case(2, reels=5))
    rows.append(("solve_exact case2 N=5", dt, gain))
    dt, gain = time_exact(builtin_case(1, reels=2))
    rows.append(("solve_exact case1 N=2", dt, gain))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=int, default=200_000)
    ap.add_argument("--reps", type=int, default=8)
    args = ap.parse_args()

    results = {}
    for backend in ("numba", "numpy"):
        try:
            results[backend] = run(backend, args.horizon, args.reps)
        except RuntimeError as exc:
            print(f"{backend}: skipped ({exc})")
    if "numba" in results:
        # warm run after jit compilation
        results["numba"] = run("numba", args.horizon, args.reps)

    names = [r[0] for r in next(iter(results.values()))]
    print(f"{'benchmark':<48}" + "".join(f"{b:>12}" for b in results) + "   speedup")
    for i, name in enumerate(names):
        times = [results[b][i][1] for b in results]
        values = {results[b][i][2] for b in results}
        ratio = times[-1] / times[0] if len(times) == 2 and times[0] > 0 else float("nan")
        print(f"{name:<48}" + "".join(f"{t:>11.3f}s" for t in times) + f"{ratio:>9.1f}x")
        if len(values) > 1 and max(values) - min(values) > 1e-6 * max(abs(v) for v in values):
            print(f"    WARNING: backend results differ: {values}")


if __name__ == "__main__":
    main()
