import math

import numpy as np
import pytest

import oracles
from likert_responsiveness.inference import (
    PermutationResult,
    ResampleConfig,
    bootstrap_ci,
    bootstrap_cis,
    item_multiplicities,
    macro_average,
    permutation_masks,
    permutation_test,
)
from likert_responsiveness.ratings_model import LikertScale
from likert_responsiveness.reference import GUIDELINE, ReferencePairSet
from likert_responsiveness.responsiveness import confusion, evaluate_pairs, wra


def worked_set():
    pairs = oracles.worked_pairs()
    n = len(pairs)
    return ReferencePairSet(
        LikertScale(4), tuple(f"i{j:02d}" for j in range(n)), np.arange(n),
        np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]), np.ones(n, dtype=np.int64), GUIDELINE,
    )


def wra_of(p):
    return wra(confusion(p))[0]


class TestMacroAverage:
    def test_mean_and_weights(self):
        assert macro_average([0.2, 0.4]) == pytest.approx(0.3)
        assert macro_average([0.2, 0.4], [3, 1]) == pytest.approx(0.25)

    def test_rejects_empty_and_undefined(self):
        with pytest.raises(ValueError):
            macro_average([])
        with pytest.raises(ValueError):
            macro_average([0.1, math.nan])


class TestBootstrap:
    def test_multiplicities(self):
        a = list(item_multiplicities(30, 5, seed=1))
        b = list(item_multiplicities(30, 5, seed=1))
        assert all(m.sum() == 30 for m in a)
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_interval_brackets_point(self):
        r = bootstrap_ci(wra_of, worked_set(), ResampleConfig(bootstrap_trials=200, seed=3))
        assert r.lo <= r.point <= r.hi
        assert r.point == pytest.approx(75 / 99)
        assert r.defined

    def test_workers_do_not_change_result(self):
        cfg = ResampleConfig(bootstrap_trials=60, seed=11)
        one = bootstrap_ci(wra_of, worked_set(), cfg, workers=1)
        many = bootstrap_ci(wra_of, worked_set(), cfg, workers=4)
        assert (one.lo, one.hi) == (many.lo, many.hi)

    def test_zero_trials(self):
        r = bootstrap_ci(wra_of, worked_set(), ResampleConfig(bootstrap_trials=0))
        assert not r.defined and r.trials == 0

    def test_undefined_replicas_flagged(self):
        r = bootstrap_cis(lambda sets: {"x": math.nan}, worked_set(), ResampleConfig(bootstrap_trials=10))["x"]
        assert not r.defined and "undefined" in r.diagnostic

    def test_resampling_is_by_item(self):
        p = worked_set()
        seen = []

        def record(sets):
            seen.append(sets[0])
            return {"v": 0.0}

        bootstrap_cis(record, p, ResampleConfig(bootstrap_trials=5, seed=2))
        for q in seen[1:]:
            assert q.pair_count == p.pair_count


class TestPermutation:
    @staticmethod
    def additive(values):
        def stat(group):
            return float(np.mean([values[r] for r in group]))
        return stat

    def test_p_value_formula(self):
        vals = {f"a{i}": 10.0 + i * 0.01 for i in range(6)} | {f"b{i}": 0.0 + i * 0.01 for i in range(6)}
        cfg = ResampleConfig(permutations=199, seed=0)
        res = permutation_test(self.additive(vals), [f"a{i}" for i in range(6)], [f"b{i}" for i in range(6)], cfg)
        # only the observed split and its mirror reach the observed gap
        masks = permutation_masks(12, 6, 199, 0)
        pool = sorted(vals)
        a_side = {pool.index(f"a{i}") for i in range(6)}
        hits = sum(set(np.flatnonzero(m)) in (a_side, set(range(12)) - a_side) for m in masks)
        assert res.p_value == pytest.approx((1 + hits) / 200)
        assert res.observed_diff == pytest.approx(10.0)

    def test_exchangeable_groups_not_significant(self):
        rng = np.random.default_rng(0)
        vals = {f"r{i}": float(v) for i, v in enumerate(rng.normal(size=20))}
        ids = sorted(vals)
        res = permutation_test(self.additive(vals), ids[:10], ids[10:], ResampleConfig(permutations=300))
        assert res.p_value > 0.01

    def test_identical_statistic_gives_one(self):
        res = permutation_test(lambda g: 1.0, ["a"], ["b"], ResampleConfig(permutations=50))
        assert res.p_value == 1.0

    def test_deterministic_and_chunk_free(self):
        vals = {f"r{i}": float(i % 7) for i in range(14)}
        ids = sorted(vals)
        cfg = ResampleConfig(permutations=120, seed=4)
        a = permutation_test(self.additive(vals), ids[:5], ids[5:], cfg, chunk=7)
        b = permutation_test(self.additive(vals), ids[:5], ids[5:], cfg, chunk=256)
        assert a == b

    def test_rejects_bad_groups(self):
        with pytest.raises(ValueError, match="disjoint"):
            permutation_test(lambda g: 0.0, ["a", "b"], ["b"], ResampleConfig())
        with pytest.raises(ValueError, match="non-empty"):
            permutation_test(lambda g: 0.0, [], ["b"], ResampleConfig())

    def test_bonferroni(self):
        r = PermutationResult(0.1, 0.02, 999)
        assert r.significant(0.05, 1) and not r.significant(0.05, 3)

    def test_masks_preserve_group_size(self):
        m = permutation_masks(9, 4, 30, 1)
        assert (m.sum(axis=1) == 4).all()


def test_evaluate_pairs_is_deterministic():
    a, b = evaluate_pairs(worked_set()), evaluate_pairs(worked_set())
    assert (a.mpa, a.wra, a.hm) == (b.mpa, b.wra, b.hm)
