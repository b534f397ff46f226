"""Acceptance criteria, one test per criterion (criterion 3 split per policy).

Reference numbers are the golden long-run waste values bundled for the
built-in cases; simulated checks run at horizon 10^6 with 30 replications
and tolerance max(2% relative, 0.3 g absolute).
"""

import time

import pytest

from reelpack.cli import main as cli_main
from reelpack.model import ComponentDistribution, ProblemInstance, builtin_case
from reelpack.policies import BestFitPolicy, FirstFitPolicy, IndexPolicy
from reelpack.simulator import SimulationConfig, elbow, simulate, sweep_reels
from reelpack.solver import solve_exact, solve_single_reel
from reelpack.verify import run_verification

from _oracles import brute_force_optimal_gain

# golden values: random-policy column (analytic target) per case
RANDOM_REFERENCE = {1: 90.344, 2: 96.999, 3: 65.215}

# golden values: optimal gains
EXACT_REFERENCE = [
    (2, 2, 7.694, 0.05),
    (2, 3, 0.520, 0.05),
    (2, 4, 0.038, 0.05),
    (2, 5, 0.003, 0.05),
    (1, 2, 25.053, 0.1),
    (3, 2, 10.684, 0.1),
]

# golden values: simulated heuristic means, keyed (case, N) -> (ff, bf, index)
HEURISTIC_REFERENCE = {
    (1, 2): (66.041, 60.450, 38.731),
    (1, 3): (61.308, 60.181, 35.177),
    (1, 4): (60.635, 60.141, 34.893),
    (1, 5): (60.557, 60.069, 34.684),
    (1, 8): (60.139, 59.651, 34.471),
    (2, 2): (45.733, 21.736, 16.730),
    (2, 3): (31.204, 6.227, 2.701),
    (2, 4): (25.772, 1.976, 0.404),
    (2, 5): (22.462, 0.654, 0.060),
    (2, 8): (16.304, 0.021, 0.000),
    (3, 2): (38.585, 18.287, 16.277),
    (3, 3): (28.154, 17.840, 13.336),
    (3, 4): (23.294, 17.816, 12.695),
    (3, 5): (20.579, 17.792, 12.421),
    (3, 8): (18.298, 17.683, 12.231),
}

SIM_CONFIG = SimulationConfig(horizon=1_000_000, warmup=300, replications=30, seed=42)


def _report(tag, ok, detail=""):
    print(f"ACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())


@pytest.fixture(scope="module")
def case_biases():
    return {c: solve_single_reel(builtin_case(c).dist, 5000) for c in (1, 2, 3)}


def test_criterion_1_analytic_random_gain(case_biases):
    failures = []
    for case_id, want in RANDOM_REFERENCE.items():
        t0 = time.perf_counter()
        bias = solve_single_reel(builtin_case(case_id).dist, 5000)
        elapsed = time.perf_counter() - t0
        if abs(bias.gain_g1 - want) > 0.5:
            failures.append(f"case{case_id}: g1={bias.gain_g1:.3f} vs {want}")
        if elapsed >= 1.0:
            failures.append(f"case{case_id}: solve took {elapsed:.2f}s")
    _report("1 analytic-random-gain", not failures, "; ".join(failures))
    assert not failures, failures


def test_criterion_2_exact_solver_gains():
    failures = []
    for case_id, n, want, tol in EXACT_REFERENCE:
        sol = solve_exact(builtin_case(case_id, reels=n))
        if abs(sol.gain - want) > tol:
            failures.append(f"case{case_id} N={n}: gain={sol.gain:.4f} vs {want}±{tol}")
    _report("2 exact-solver", not failures, "; ".join(failures))
    assert not failures, failures


def _check_heuristic_column(policy_factory, column, label, case_biases):
    failures = []
    for (case_id, n), refs in sorted(HEURISTIC_REFERENCE.items()):
        want = refs[column]
        inst = builtin_case(case_id, reels=n)
        rep = simulate(inst, policy_factory(case_biases[case_id]), SIM_CONFIG)
        got = rep.mean_waste_per_component
        tol = max(0.02 * want, 0.3)
        if abs(got - want) > tol:
            failures.append(
                f"case{case_id} N={n}: {got:.3f} vs {want:.3f} (tol {tol:.3f})"
            )
    _report(f"3 heuristic-{label}", not failures, "; ".join(failures))
    assert not failures, failures


def test_criterion_3_first_fit_column(case_biases):
    _check_heuristic_column(lambda b: FirstFitPolicy(), 0, "first-fit", case_biases)


def test_criterion_3_best_fit_column(case_biases):
    _check_heuristic_column(lambda b: BestFitPolicy(), 1, "best-fit", case_biases)


def test_criterion_3_index_column(case_biases):
    _check_heuristic_column(IndexPolicy, 2, "index", case_biases)


def test_criterion_4_structural_battery():
    t0 = time.perf_counter()
    results = run_verification()
    elapsed = time.perf_counter() - t0
    failed = [r.line() for r in results if not r.passed]
    ok = not failed and elapsed < 10.0
    _report("4 structural-battery",
            ok, f"{len(results)} checks in {elapsed:.1f}s; " + "; ".join(failed))
    assert not failed, failed
    assert elapsed < 10.0


def test_criterion_5_oracle_equivalence():
    cases = [
        ((2, 3), (0.5, 0.5), 4, True),
        ((2, 5), (0.4, 0.6), 5, True),
        ((3, 4), (0.5, 0.5), 6, True),
    ]
    failures = []
    for ws, ps, B, sym in cases:
        inst = ProblemInstance(B, 2, ComponentDistribution(list(ws), list(ps)), "tiny")
        sol = solve_exact(inst, tolerance=1e-12, symmetry=sym)
        want = brute_force_optimal_gain(list(ws), list(ps), B, 2, symmetric=sym)
        if abs(sol.gain - want) > 1e-8:
            failures.append(f"B={B} w={ws}: {sol.gain!r} vs {want!r}")
    _report("5 oracle-equivalence", not failures, "; ".join(failures))
    assert not failures, failures


def test_criterion_6_case4_monotonicity_and_elbow(case_biases):
    inst = builtin_case(4)
    bias = solve_single_reel(inst.dist, inst.capacity_B)
    reports = sweep_reels(inst, IndexPolicy(bias), [2, 3, 4, 5, 8], SIM_CONFIG)
    curve = {n: r.mean_waste_per_component for n, r in reports.items()}
    failures = []
    ns = sorted(curve)
    for a, b in zip(ns, ns[1:]):
        slack = reports[a].ci95_halfwidth + reports[b].ci95_halfwidth
        if curve[b] > curve[a] + slack:
            failures.append(f"f({b})={curve[b]:.3f} > f({a})={curve[a]:.3f}+CI")
    rep = elbow(curve)
    for n, d2 in rep.second_differences:
        want = curve[n + 1] - 2 * curve[n] + curve[n - 1]
        if abs(d2 - want) > 1e-12:
            failures.append(f"d2f({n}) not recomputable")
    detail = "curve " + ", ".join(f"{n}:{curve[n]:.3f}" for n in ns)
    detail += "; d2f " + ", ".join(f"{n}:{v:.3f}" for n, v in rep.second_differences)
    _report("6 case4-sweep-elbow", not failures, "; ".join(failures) or detail)
    assert not failures, failures


def test_criterion_7_cli_determinism(tmp_path):
    args = ["simulate", "--instance", "case2", "--reels", "3", "--policy", "index",
            "--horizon", "50000", "--warmup", "300", "--reps", "5", "--seed", "42"]
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        assert cli_main(args + ["--out", str(p)]) == 0
    sim_ok = paths[0].read_bytes() == paths[1].read_bytes()

    targs = ["table6", "--cases", "2", "--reel-list", "2,3",
             "--policies", "random,bf,exact", "--horizon", "20000", "--reps", "3"]
    tpaths = [tmp_path / "t1.csv", tmp_path / "t2.csv"]
    for p in tpaths:
        assert cli_main(targs + ["--out", str(p)]) == 0
    table_ok = tpaths[0].read_bytes() == tpaths[1].read_bytes()

    _report("7 cli-determinism", sim_ok and table_ok)
    assert sim_ok and table_ok
