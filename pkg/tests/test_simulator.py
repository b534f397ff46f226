import numpy as np
import pytest
from numpy.testing import assert_array_equal

from reelpack.model import ComponentDistribution, InputError, ProblemInstance
from reelpack.policies import BestFitPolicy, FirstFitPolicy, IndexPolicy, RandomPolicy
from reelpack.simulator import (
    SimulationConfig,
    compare,
    elbow,
    simulate,
    sweep_reels,
)
from reelpack.solver import evaluate_policy_exact


def test_simulate_is_reproducible(tiny_instance):
    cfg = SimulationConfig(horizon=5000, warmup=100, replications=4, seed=33)
    a = simulate(tiny_instance, BestFitPolicy(), cfg)
    b = simulate(tiny_instance, BestFitPolicy(), cfg)
    assert a.total_waste == b.total_waste
    assert a.per_replication_means == b.per_replication_means
    assert a.replacement_count == b.replacement_count


def test_simulate_matches_stepwise_reference(tiny_instance):
    # independent re-simulation: regenerate the same component streams and
    # walk the first-fit rule state by state
    cfg = SimulationConfig(horizon=4000, warmup=250, replications=3, seed=77)
    rep = simulate(tiny_instance, FirstFitPolicy(), cfg)

    root = np.random.SeedSequence((cfg.seed, 0))
    comp_root, _ = root.spawn(2)
    comp_seqs = comp_root.spawn(cfg.replications)
    B = tiny_instance.capacity_B
    ws = tiny_instance.dist.weights_array()
    cum = np.cumsum(tiny_instance.dist.probs_array())
    totals, repls = [], 0
    for r in range(cfg.replications):
        rng = np.random.Generator(np.random.PCG64(comp_seqs[r]))
        comps = ws[np.searchsorted(cum, rng.random(cfg.horizon), side="right")]
        reels = [0, 0]
        waste = 0
        for t, x in enumerate(comps):
            a = next((n for n, w in enumerate(reels) if w >= x), None)
            if a is None:
                a = int(np.argmin(reels))
            if reels[a] >= x:
                reels[a] -= x
            else:
                if t >= cfg.warmup:
                    waste += reels[a]
                    repls += 1
                reels[a] = B - x
        totals.append(waste)
    assert rep.total_waste == sum(totals)
    assert rep.replacement_count == repls
    assert rep.mean_waste_per_component == sum(totals) / (
        cfg.replications * (cfg.horizon - cfg.warmup)
    )


def test_report_accounting_identities(tiny_instance):
    cfg = SimulationConfig(horizon=3000, warmup=200, replications=5, seed=3)
    rep = simulate(tiny_instance, RandomPolicy(), cfg)
    per = cfg.horizon - cfg.warmup
    assert rep.total_components == cfg.replications * per
    assert rep.mean_waste_per_component == rep.total_waste / rep.total_components
    means = np.asarray(rep.per_replication_means)
    assert abs(means.mean() - rep.mean_waste_per_component) < 1e-12
    assert abs(rep.ci95_halfwidth - 1.96 * rep.std_error) < 1e-15


def test_deterministic_cycle_long_run():
    inst = ProblemInstance(10, 1, ComponentDistribution([3], [1.0]), "det")
    cfg = SimulationConfig(horizon=150_000, warmup=300, replications=2, seed=0)
    for policy in (FirstFitPolicy(), BestFitPolicy()):
        rep = simulate(inst, policy, cfg)
        assert abs(rep.mean_waste_per_component - 1.0 / 3.0) < 1e-3


def test_warmup_neutrality():
    inst = ProblemInstance(5000, 2,
                           ComponentDistribution([500, 1000, 1500], [0.25, 0.25, 0.5]),
                           "case2")
    base = SimulationConfig(horizon=200_000, warmup=300, replications=6, seed=21)
    doubled = SimulationConfig(horizon=200_000, warmup=600, replications=6, seed=21)
    a = simulate(inst, BestFitPolicy(), base)
    b = simulate(inst, BestFitPolicy(), doubled)
    assert abs(a.mean_waste_per_component - b.mean_waste_per_component) < a.ci95_halfwidth


def test_simulated_mean_consistent_with_exact_gain(tiny_instance, tiny_bias):
    policies = [FirstFitPolicy(), BestFitPolicy(), IndexPolicy(tiny_bias)]
    within = 0
    total = 0
    for policy in policies:
        exact = evaluate_policy_exact(tiny_instance, policy, tolerance=1e-11).gain
        for seed in range(20):
            cfg = SimulationConfig(horizon=20_000, warmup=300, replications=6, seed=seed)
            rep = simulate(tiny_instance, policy, cfg)
            total += 1
            if abs(rep.mean_waste_per_component - exact) <= 3 * rep.ci95_halfwidth:
                within += 1
    assert within / total >= 0.95


def test_compare_identical_policies_zero_difference(tiny_instance, tiny_bias):
    cfg = SimulationConfig(horizon=4000, warmup=100, replications=4, seed=5)
    result = compare(tiny_instance, [IndexPolicy(tiny_bias), IndexPolicy(tiny_bias)], cfg)
    a, b, diff, stderr, ci = result.diffs[0]
    assert diff == 0.0 and stderr == 0.0
    assert result.reports[0].per_replication_means == result.reports[1].per_replication_means


def test_compare_sign_matches_exact_ordering(tiny_instance, tiny_bias):
    bf_gain = evaluate_policy_exact(tiny_instance, BestFitPolicy(), tolerance=1e-11).gain
    idx_gain = evaluate_policy_exact(tiny_instance, IndexPolicy(tiny_bias),
                                     tolerance=1e-11).gain
    cfg = SimulationConfig(horizon=150_000, warmup=300, replications=8, seed=11)
    result = compare(tiny_instance, [BestFitPolicy(), IndexPolicy(tiny_bias)], cfg)
    _, _, diff, _, ci = result.diffs[0]
    assert abs(diff - (bf_gain - idx_gain)) <= max(3 * ci, 1e-3)
    if abs(bf_gain - idx_gain) > 3 * ci:
        assert np.sign(diff) == np.sign(bf_gain - idx_gain)


def test_compare_without_crn_uses_independent_streams(tiny_instance):
    cfg = SimulationConfig(horizon=4000, warmup=100, replications=3, seed=5, crn=False)
    result = compare(tiny_instance, [BestFitPolicy(), BestFitPolicy()], cfg)
    assert result.reports[0].per_replication_means != result.reports[1].per_replication_means


def test_sweep_single_point_equals_simulate(tiny_instance):
    cfg = SimulationConfig(horizon=3000, warmup=100, replications=3, seed=8)
    swept = sweep_reels(tiny_instance, BestFitPolicy(), [1], cfg)
    direct = simulate(tiny_instance.with_reels(1), BestFitPolicy(), cfg)
    assert swept[1] == direct


def test_sweep_autoscales_horizon():
    inst = ProblemInstance(10, 1, ComponentDistribution([3], [1.0]), "det")
    cfg = SimulationConfig(horizon=50, warmup=0, replications=2, seed=8)
    swept = sweep_reels(inst, FirstFitPolicy(), [12], cfg)
    assert swept[12].horizon >= 3 * 12 * (10 / 3.0)


def test_elbow_arithmetic():
    rep = elbow({2: 10.0, 3: 6.0, 4: 5.0, 5: 4.8})
    assert rep.as_dict() == {3: pytest.approx(3.0), 4: pytest.approx(0.8)}
    assert rep.argmax_n == 3

    linear = elbow({n: 10.0 - 2 * n for n in range(1, 6)})
    assert all(abs(v) < 1e-12 for v in linear.as_dict().values())


def test_elbow_input_errors():
    with pytest.raises(InputError):
        elbow({2: 1.0, 3: 0.5})
    with pytest.raises(InputError):
        elbow({2: 1.0, 4: 0.5, 8: 0.2})  # no three consecutive reel counts


def test_config_validation(tiny_instance):
    with pytest.raises(InputError):
        SimulationConfig(horizon=100, warmup=100).resolved_horizon(tiny_instance)
    with pytest.raises(InputError):
        SimulationConfig(replications=0).resolved_horizon(tiny_instance)
    with pytest.raises(InputError):
        SimulationConfig(initial_reels=(1, 2, 3)).start_weights(tiny_instance)
    with pytest.raises(InputError):
        SimulationConfig(initial_reels=(1, 10)).start_weights(tiny_instance)
    ok = SimulationConfig(initial_reels=(4, 7)).start_weights(tiny_instance)
    assert_array_equal(ok, [4, 7])


def test_threading_does_not_change_results(tiny_instance):
    a = simulate(tiny_instance, BestFitPolicy(),
                 SimulationConfig(horizon=6000, warmup=100, replications=5, seed=2,
                                  threads=1))
    b = simulate(tiny_instance, BestFitPolicy(),
                 SimulationConfig(horizon=6000, warmup=100, replications=5, seed=2,
                                  threads=4))
    assert a.total_waste == b.total_waste
    assert a.per_replication_means == b.per_replication_means


def test_initial_reels_affect_transient_only():
    inst = ProblemInstance(10, 2, ComponentDistribution([3, 4], [0.6, 0.4]), "tiny")
    long_cfg = SimulationConfig(horizon=120_000, warmup=2000, replications=4, seed=13)
    zeros = simulate(inst, BestFitPolicy(), long_cfg)
    from dataclasses import replace

    shifted = simulate(inst, BestFitPolicy(), replace(long_cfg, initial_reels=(5, 9)))
    assert abs(zeros.mean_waste_per_component - shifted.mean_waste_per_component) < (
        zeros.ci95_halfwidth + shifted.ci95_halfwidth
    )
