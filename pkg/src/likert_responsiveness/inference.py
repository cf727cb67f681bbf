"""Bootstrap intervals, permutation tests and macro-averaging.

Resampling is keyed: trial ``i`` of a run with seed ``s`` always draws from
the generator keyed by ``(s, purpose, i)``, so results do not depend on the
number of workers or the order in which trials run.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from ._rng import keyed_rng
from .reference import ReferencePairSet

UNDEFINED_LIMIT = 0.2


@dataclass(frozen=True)
class ResampleConfig:
    bootstrap_trials: int = 100
    permutations: int = 1000
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.bootstrap_trials < 0 or self.permutations < 1:
            raise ValueError("bootstrap_trials must be >= 0 and permutations >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class IntervalResult:
    point: float
    lo: float
    hi: float
    trials: int
    diagnostic: str = ""

    @property
    def defined(self) -> bool:
        return not (math.isnan(self.lo) or math.isnan(self.hi))


@dataclass(frozen=True)
class PermutationResult:
    observed_diff: float
    p_value: float
    permutations: int

    def significant(self, alpha: float = 0.05, n_tests: int = 1) -> bool:
        """Significance at ``alpha``, Bonferroni-adjusted for ``n_tests`` comparisons."""
        return self.p_value < alpha / n_tests


def macro_average(results: Sequence[float], weights: Sequence[float] | None = None) -> float:
    if len(results) == 0:
        raise ValueError("nothing to average")
    vals = np.asarray(results, dtype=float)
    if np.isnan(vals).any():
        raise ValueError("cannot macro-average undefined values")
    if weights is None:
        return float(vals.mean())
    return float(np.average(vals, weights=np.asarray(weights, dtype=float)))


# Bootstrap ------------------------------------------------------------------

def item_multiplicities(n_items: int, trials: int, seed: int) -> Iterator[np.ndarray]:
    """Per-trial counts of how often each item is drawn (with replacement)."""
    for i in range(trials):
        draw = keyed_rng(seed, "bootstrap", i).integers(0, n_items, n_items)
        yield np.bincount(draw, minlength=n_items)


def _align(pair_sets: Sequence[ReferencePairSet]) -> tuple[list[str], list[np.ndarray]]:
    universe = sorted(set().union(*(p.item_ids for p in pair_sets)))
    pos = {item: k for k, item in enumerate(universe)}
    maps = [np.array([pos[i] for i in p.item_ids], dtype=np.int64) for p in pair_sets]
    return universe, maps


def resample(pair_sets: Sequence[ReferencePairSet], multiplicity: np.ndarray, maps=None) -> list[ReferencePairSet]:
    """Apply one item-level resample to every pair set (pairs of an item move together)."""
    if maps is None:
        _, maps = _align(pair_sets)
    return [p.reweighted(multiplicity[m]) for p, m in zip(pair_sets, maps)]


def _percentile(values: np.ndarray, alpha: float) -> tuple[float, float]:
    lo, hi = np.percentile(values, [100 * alpha / 2, 100 * (1 - alpha / 2)])
    return float(lo), float(hi)


def bootstrap_cis(
    metric: Callable[[list[ReferencePairSet]], dict[str, float]],
    pairs: ReferencePairSet | Sequence[ReferencePairSet],
    cfg: ResampleConfig,
    *,
    workers: int = 1,
) -> dict[str, IntervalResult]:
    """Percentile intervals for several metrics computed on the same replicas.

    ``metric`` receives the list of (resampled) pair sets and returns a mapping
    of metric name to value. A metric that is undefined (NaN) on more than 20%
    of replicas gets an undefined interval.
    """
    sets = [pairs] if isinstance(pairs, ReferencePairSet) else list(pairs)
    if not sets or all(p.pair_count == 0 for p in sets):
        raise ValueError("empty pair set")
    point = metric(sets)
    universe, maps = _align(sets)
    mults = list(item_multiplicities(len(universe), cfg.bootstrap_trials, cfg.seed))

    def one(m):
        return metric(resample(sets, m, maps))

    if workers > 1 and len(mults) > 1:
        with ThreadPoolExecutor(workers) as pool:
            reps = list(pool.map(one, mults))
    else:
        reps = [one(m) for m in mults]

    out = {}
    for name, value in point.items():
        vals = np.array([r[name] for r in reps], dtype=float)
        n_bad = int(np.isnan(vals).sum())
        if cfg.bootstrap_trials == 0:
            out[name] = IntervalResult(value, math.nan, math.nan, 0, "no bootstrap trials")
        elif n_bad > UNDEFINED_LIMIT * len(vals):
            out[name] = IntervalResult(
                value, math.nan, math.nan, cfg.bootstrap_trials,
                f"metric undefined on {n_bad}/{len(vals)} resamples",
            )
        else:
            lo, hi = _percentile(vals[~np.isnan(vals)], cfg.alpha)
            out[name] = IntervalResult(value, lo, hi, cfg.bootstrap_trials)
    return out


def bootstrap_ci(
    metric: Callable[[ReferencePairSet | list[ReferencePairSet]], float],
    pairs: ReferencePairSet | Sequence[ReferencePairSet],
    cfg: ResampleConfig,
    *,
    workers: int = 1,
) -> IntervalResult:
    """Item-level percentile bootstrap for one metric.

    ``metric`` gets a single pair set when ``pairs`` is one, else the list.
    """
    single = isinstance(pairs, ReferencePairSet)

    def wrapped(sets):
        return {"value": float(metric(sets[0] if single else sets))}

    return bootstrap_cis(wrapped, pairs, cfg, workers=workers)["value"]


# Permutation ----------------------------------------------------------------

def permutation_masks(pool_size: int, size_a: int, permutations: int, seed: int) -> np.ndarray:
    """Boolean (permutations, pool_size) matrix; True marks membership of group A."""
    masks = np.zeros((permutations, pool_size), dtype=bool)
    for i in range(permutations):
        order = keyed_rng(seed, "permutation", i).permutation(pool_size)
        masks[i, order[:size_a]] = True
    return masks


def permutation_test(
    statistic: Callable[[frozenset[str]], float],
    group_a: Iterable[str],
    group_b: Iterable[str],
    cfg: ResampleConfig,
    *,
    chunk: int = 256,
) -> PermutationResult:
    """Two-sided test of ``statistic(A) - statistic(B)`` under rater relabelling.

    Raters of the two groups are pooled and reassigned at random with group
    sizes preserved; ``p = (1 + #{|perm diff| >= |observed|}) / (1 + permutations)``.
    If ``statistic`` has a ``many(pool, masks)`` method it is used to evaluate
    a batch of rater subsets at once.
    """
    a, b = frozenset(group_a), frozenset(group_b)
    if not a or not b:
        raise ValueError("both groups must be non-empty")
    if a & b:
        raise ValueError("groups must be disjoint")
    pool = sorted(a | b)
    if len(pool) < 2:
        raise ValueError("need at least two distinct raters to permute")
    observed = float(statistic(a)) - float(statistic(b))
    if math.isnan(observed):
        return PermutationResult(math.nan, math.nan, cfg.permutations)
    masks = permutation_masks(len(pool), len(a), cfg.permutations, cfg.seed)
    diffs = np.empty(cfg.permutations)
    many = getattr(statistic, "many", None)
    for start in range(0, cfg.permutations, chunk):
        block = masks[start:start + chunk]
        if many is not None:
            diffs[start:start + len(block)] = many(pool, block) - many(pool, ~block)
        else:
            for j, m in enumerate(block):
                ga = frozenset(r for r, keep in zip(pool, m) if keep)
                diffs[start + j] = float(statistic(ga)) - float(statistic(frozenset(pool) - ga))
    tol = 1e-12 * max(1.0, abs(observed))
    exceed = int(np.sum(np.abs(diffs) >= abs(observed) - tol))
    return PermutationResult(observed, (1 + exceed) / (1 + cfg.permutations), cfg.permutations)
