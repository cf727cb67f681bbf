"""Full aggregation -> reference -> metric pipeline as a statistic of a rater set.

``GroupStatistic`` is what permutation tests recompute for every relabelling.
Calling it runs the ordinary module functions; ``many`` evaluates a batch of
rater subsets with array operations and must agree with the scalar path.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import baselines as bl
from .aggregation import AggregationPolicy, aggregate, lower_median, mean_half_up, plurality, tie_priorities
from .reference import CROWD, GUIDELINE, Boundary, LabelCounts, all_boundaries, crowd_pairs_all, guideline_pairs
from .ratings_model import RatingTable
from .responsiveness import confusion, hm_values, mpa_values, wra_values

METRICS = ("mpa", "wra", "hm", "tau_b", "tau_a", "spearman_rho", "auroc", "aucpr")

_COUNT_KERNELS = {
    "tau_b": bl.tau_b_from_counts,
    "tau_a": bl.tau_a_from_counts,
    "spearman_rho": bl.spearman_from_counts,
    "auroc": bl.auroc_from_counts,
    "aucpr": bl.aucpr_from_counts,
}


def metrics_from_counts(n1: np.ndarray, n0: np.ndarray, names: Sequence[str] = METRICS) -> dict[str, np.ndarray]:
    """Batched metrics over confusion counts with a trailing score axis."""
    out = {}
    if {"mpa", "hm"} & set(names) or "wra" in names:
        m, w = mpa_values(n1, n0), wra_values(n1, n0)
        out.update(mpa=m, wra=w, hm=hm_values(m, w))
    for name in names:
        if name in _COUNT_KERNELS:
            out[name] = _COUNT_KERNELS[name](n1, n0)
    return {k: out[k] for k in names}


def macro(per_boundary: list[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
    """Boundary macro-average: plain mean for responsiveness, mean of defined values otherwise."""
    out = {}
    for name in per_boundary[0]:
        stack = np.stack([np.asarray(d[name], dtype=float) for d in per_boundary])
        if name in ("mpa", "wra", "hm"):
            out[name] = stack.mean(axis=0)
        else:
            n_def = (~np.isnan(stack)).sum(axis=0)
            with np.errstate(invalid="ignore"):
                total = np.where(np.isnan(stack), 0.0, stack).sum(axis=0)
                out[name] = np.where(n_def > 0, total / np.maximum(n_def, 1), np.nan)
    return out


class GroupStatistic:
    """Metric of a rater group under a fixed table, reference and policy."""

    def __init__(
        self,
        table: RatingTable,
        *,
        reference: str = GUIDELINE,
        labels: LabelCounts | None = None,
        boundaries: Sequence[Boundary] | None = None,
        policy: AggregationPolicy = AggregationPolicy(),
        metric: str = "hm",
        collapse: bool = False,
    ):
        if reference not in (GUIDELINE, CROWD):
            raise ValueError(f"unknown reference kind {reference!r}")
        if reference == GUIDELINE and labels is None:
            raise ValueError("guideline reference needs trained-rater labels")
        if metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        self.table = table
        self.reference = reference
        self.labels = labels
        self.boundaries = list(boundaries) if boundaries is not None else all_boundaries(table.scale)
        self.policy = policy
        self.metric = metric
        self.collapse = collapse

    # scalar path ---------------------------------------------------------

    def pair_sets(self, raters: Iterable[str]):
        raters = set(raters)
        scores = aggregate(self.table, raters, self.policy)
        if self.reference == GUIDELINE:
            return [guideline_pairs(scores, self.labels, collapse=self.collapse)]
        return crowd_pairs_all(self.table, raters, scores, self.boundaries, collapse=self.collapse)

    def __call__(self, raters: Iterable[str]) -> float:
        try:
            sets = self.pair_sets(raters)
        except ValueError:
            return math.nan
        per = []
        for p in sets:
            c = confusion(p)
            per.append(metrics_from_counts(c.n1, c.n0, (self.metric,)))
        return float(macro(per)[self.metric])

    # batched path --------------------------------------------------------

    @cached_property
    def _onehot(self) -> np.ndarray:
        x = self.table.dense
        k1 = self.table.scale.n_points
        return (x[:, :, None] == np.arange(k1)).astype(np.float64)

    @cached_property
    def _priorities(self) -> np.ndarray:
        return tie_priorities(self.table.item_ids, self.table.scale.k_max, self.policy.seed)

    @cached_property
    def _label_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        n_items = len(self.table.item_ids)
        n1 = np.zeros(n_items)
        n0 = np.zeros(n_items)
        pos = {item: k for k, item in enumerate(self.labels.item_ids)}
        for i, item in enumerate(self.table.item_ids):
            k = pos.get(item)
            if k is not None:
                n1[i], n0[i] = self.labels.n1[k], self.labels.n0[k]
        return n1, n0

    def _group_scores(self, masks: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        counts = np.einsum("pr,irk->pik", masks, self._onehot)
        covered = counts.sum(axis=-1) > 0
        if self.policy.kind == "median":
            scores = lower_median(np.where(covered[..., None], counts, 1))
        elif self.policy.kind == "mean":
            scores = mean_half_up(np.where(covered[..., None], counts, 1).astype(np.int64))
        else:
            scores = plurality(counts, self._priorities)
        return scores, covered

    def many(self, pool: Sequence[str], masks: np.ndarray) -> np.ndarray:
        """Statistic for each row of ``masks`` (rows select raters from ``pool``)."""
        masks = np.asarray(masks, dtype=bool)
        if self.collapse:
            return np.array([self(r for r, keep in zip(pool, m) if keep) for m in masks])
        full =np.zeros((len(masks), len(self.table.rater_ids)))
        cols = [self.table.rater_ids.index(r) if r in self.table.rater_ids else -1 for r in pool]
        for j, col in enumerate(cols):
            if col >= 0:
                full[:, col] = masks[:, j]
        n_items = len(self.table.item_ids)
        k1 = self.table.scale.n_points
        step = max(1, int(4e6 // max(1, n_items * k1)))
        out = np.empty(len(masks))
        for start in range(0, len(masks), step):
            out[start:start + step] = self._many_block(full[start:start + step])
        return out

    def _many_block(self, full: np.ndarray) -> np.ndarray:
        scores, covered = self._group_scores(full)
        k1 = self.table.scale.n_points
        s_onehot = (scores[..., None] == np.arange(k1)) & covered[..., None]
        empty_group = full.sum(axis=1) == 0
        if self.reference == GUIDELINE:
            l1, l0 = self._label_arrays
            n1 = np.einsum("pik,i->pk", s_onehot, l1)
            n0 = np.einsum("pik,i->pk", s_onehot, l0)
            res = metrics_from_counts(n1, n0, (self.metric,))[self.metric]
            bad = empty_group | ((n1 + n0).sum(axis=1) == 0)
            return np.where(bad, np.nan, res)
        x = self.table.dense
        present = (x >= 0).astype(np.float64)
        ref = 1.0 - full
        total = ref @ present.T
        usable = s_onehot & (total > 0)[..., None]
        per = []
        for b in self.boundaries:
            ge = ((x >= b.t) & (x >= 0)).astype(np.float64)
            r1 = ref @ ge.T
            n1 = np.einsum("pik,pi->pk", usable, r1)
            n0 = np.einsum("pik,pi->pk", usable, total - r1)
            per.append(metrics_from_counts(n1, n0, (self.metric,)))
        res = macro(per)[self.metric]
        bad = empty_group | (ref.sum(axis=1) == 0) | (usable.sum(axis=(1, 2)) == 0)
        return np.where(bad, np.nan, res)
