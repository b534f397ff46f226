import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from reelpack.model import (
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

from _oracles import closure


def test_apply_assignment_consumes_when_reel_suffices():
    assert apply_assignment(3000, 1000, 5000) == (2000, 0)


def test_apply_assignment_replaces_and_discards():
    assert apply_assignment(500, 1000, 5000) == (4000, 500)


def test_apply_assignment_empty_reel_is_free():
    assert apply_assignment(0, 1, 5000) == (4999, 0)


def test_apply_assignment_rejects_out_of_range():
    with pytest.raises(InputError):
        apply_assignment(-1, 3, 10)
    with pytest.raises(InputError):
        apply_assignment(10, 3, 10)  # w must stay below B
    with pytest.raises(InputError):
        apply_assignment(5, 0, 10)
    with pytest.raises(InputError):
        apply_assignment(5, 11, 10)


def test_apply_assignment_ranges_exhaustive():
    # every (w, x) pair at small capacity keeps the next weight in 0..B-1
    # and wastes exactly w when and only when the reel is short
    B = 60
    for w in range(B):
        for x in range(1, B + 1):
            nxt, waste = apply_assignment(w, x, B)
            assert 0 <= nxt <= B - 1
            if w < x:
                assert waste == w and nxt == B - x
            else:
                assert waste == 0 and nxt == w - x


def test_step_examples():
    s, waste = step(AugmentedState((7, 4), 3), 1, 3, 10)
    assert s == AugmentedState((4, 4), 3) and waste == 0
    s, waste = step(AugmentedState((1, 4), 3), 1, 3, 10)
    assert s == AugmentedState((7, 4), 3) and waste == 1
    s, waste = step(AugmentedState((2, 2), 3), 2, 3, 10)
    assert s == AugmentedState((2, 7), 3) and waste == 2


def test_step_rejects_bad_action():
    with pytest.raises(InputError):
        step(AugmentedState((2, 2), 3), 0, 3, 10)
    with pytest.raises(InputError):
        step(AugmentedState((2, 2), 3), 3, 3, 10)


def test_step_leaves_other_reels_untouched():
    rng = np.random.default_rng(0)
    B = 50
    for _ in range(200):
        reels = tuple(int(v) for v in rng.integers(0, B, size=4))
        x = int(rng.integers(1, B + 1))
        a = int(rng.integers(1, 5))
        after, _ = step(AugmentedState(reels, x), a, x, B)
        for n in range(4):
            if n != a - 1:
                assert after.reels[n] == reels[n]


def test_enumerate_reachable_examples():
    dist = ComponentDistribution([500, 1000, 1500], [0.25, 0.25, 0.5])
    got = enumerate_reachable(dist, 5000, seeds={0})
    assert_array_equal(got, np.arange(0, 5000, 500))

    dist = ComponentDistribution([5000], [1.0])
    assert_array_equal(enumerate_reachable(dist, 5000, seeds={0}), [0])

    dist = ComponentDistribution([3], [1.0])
    assert_array_equal(enumerate_reachable(dist, 10, seeds={0}), [0, 1, 4, 7])


def test_enumerate_reachable_is_closed_and_matches_naive_closure():
    rng = np.random.default_rng(1)
    for _ in range(20):
        B = int(rng.integers(5, 40))
        k = int(rng.integers(1, 4))
        ws = sorted(rng.choice(np.arange(1, B + 1), size=k, replace=False).tolist())
        dist = ComponentDistribution(ws, [1.0 / k] * k)
        got = enumerate_reachable(dist, B)
        # closed: applying the update to every member adds nothing
        members = set(int(v) for v in got)
        for w in members:
            for x in ws:
                e = w - x if w >= x else B - x
                assert e in members
        expected = closure(ws, B, seeds=tuple({0} | {B - x for x in ws}))
        assert_array_equal(got, expected)


def test_enumerate_reachable_rejects_bad_seed():
    dist = ComponentDistribution([3], [1.0])
    with pytest.raises(InputError):
        enumerate_reachable(dist, 10, seeds={10})


# expected (mean, std, fit ratio) of the built-in component distributions
CASE_STATS = {
    1: (855.43, 151.38, 5.85),
    2: (1125.00, 414.58, 4.44),
    3: (701.08, 238.77, 7.13),
    4: (504.56, 244.21, 9.91),
}


@pytest.mark.parametrize("case_id", [1, 2, 3, 4])
def test_builtin_case_statistics(case_id):
    inst = builtin_case(case_id)
    mean, std, ratio = CASE_STATS[case_id]
    assert abs(inst.dist.mean - mean) < 0.01
    assert abs(inst.dist.std - std) < 0.01
    assert abs(inst.fit_ratio - ratio) < 0.01
    assert inst.capacity_B == 5000
    assert inst.dist.weights == tuple(sorted(inst.dist.weights))


def test_builtin_case_unknown_id():
    with pytest.raises(InputError):
        builtin_case(5)


def test_distribution_sorts_and_renormalizes():
    d = ComponentDistribution([1500, 500, 1000], [0.5, 0.25, 0.25])
    assert d.weights == (500, 1000, 1500)
    assert d.probs == (0.25, 0.25, 0.5)
    assert abs(sum(d.probs) - 1.0) < 1e-15


def test_distribution_validation():
    with pytest.raises(InputError):
        ComponentDistribution([3, 3], [0.5, 0.5])
    with pytest.raises(InputError):
        ComponentDistribution([3, 4], [0.5, 0.6])
    with pytest.raises(InputError):
        ComponentDistribution([0, 4], [0.5, 0.5])
    with pytest.raises(InputError):
        ComponentDistribution([3, 4], [1.0, 0.0])
    with pytest.raises(InputError):
        ComponentDistribution([], [])


def test_instance_validation():
    dist = ComponentDistribution([3, 4], [0.5, 0.5])
    with pytest.raises(InputError):
        ProblemInstance(3, 2, dist)  # B below the heaviest component
    with pytest.raises(InputError):
        ProblemInstance(10, 0, dist)


def test_load_instance_builtin_and_config(tmp_path):
    inst = load_instance("case2", reels=3)
    assert inst.name == "case2" and inst.reel_count_N == 3

    cfg = {"name": "custom", "B": 20, "N": 2, "weights": [4, 9], "probs": [0.3, 0.7]}
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(cfg))
    inst = load_instance(path)
    assert inst.name == "custom" and inst.capacity_B == 20 and inst.reel_count_N == 2
    assert load_instance(path, reels=5).reel_count_N == 5

    with pytest.raises(InputError):
        load_instance("case9")
    with pytest.raises(InputError):
        load_instance(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InputError):
        load_instance(bad)
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps({"B": 10}))
    with pytest.raises(InputError):
        load_instance(incomplete)
