"""Collapse a rater group's scores on each item into one ordinal score."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._rng import keyed_rng, stable_hash64
from .ratings_model import LikertScale, RatingTable

KINDS = ("plurality", "median", "mean")


@dataclass(frozen=True)
class AggregationPolicy:
    kind: str = "plurality"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"aggregation kind must be one of {KINDS}, got {self.kind!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class GroupScoreTable:
    """Per-item group score and the number of ratings behind it."""

    scale: LikertScale
    item_ids: tuple[str, ...]
    scores: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        if len(self.item_ids) != len(self.scores) or len(self.scores) != len(self.support):
            raise ValueError("item_ids, scores and support must align")
        if len(self.scores) and (self.scores.min() < 0 or self.scores.max() > self.scale.k_max):
            raise ValueError("group score outside scale")
        if len(self.support) and self.support.min() < 1:
            raise ValueError("support must be >= 1")

    @property
    def entries(self) -> dict[str, tuple[int, int]]:
        return {i: (int(s), int(n)) for i, s, n in zip(self.item_ids, self.scores, self.support)}

    def __len__(self) -> int:
        return len(self.item_ids)

    def __getitem__(self, item_id: str) -> tuple[int, int]:
        return self.entries[item_id]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupScoreTable):
            return NotImplemented
        return (
            self.scale == other.scale
            and self.item_ids == other.item_ids
            and np.array_equal(self.scores, other.scores)
            and np.array_equal(self.support, other.support)
        )

    def export_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("item_id", "score", "support"))
            for i, s, n in zip(self.item_ids, self.scores, self.support):
                w.writerow((i, int(s), int(n)))


def tie_priorities(item_ids: Sequence[str], k_max: int, seed: int) -> np.ndarray:
    """Per-item random priority over scores ``0..k_max``.

    The tied mode with the highest priority wins. Priorities for an item depend
    only on ``(seed, item_id)``, so the winner is uniform over the tied modes
    and independent of which other items are aggregated alongside it.
    """
    out = np.empty((len(item_ids), k_max + 1))
    for row, item in enumerate(item_ids):
        out[row] = keyed_rng(seed, "tie-break", stable_hash64(item)).random(k_max + 1)
    return out


def score_counts(table: RatingTable, mask: np.ndarray) -> np.ndarray:
    """Items x scores histogram of ratings by raters in ``mask``."""
    sel = mask[table.rater_idx]
    counts = np.zeros((len(table.item_ids), table.scale.n_points), dtype=np.int64)
    np.add.at(counts, (table.item_idx[sel], table.scores[sel]), 1)
    return counts


def lower_median(counts: np.ndarray) -> np.ndarray:
    """Lower median per row of a score histogram (rows must be non-empty)."""
    n = counts.sum(axis=-1)
    cum = np.cumsum(counts, axis=-1)
    target = (n + 1) // 2
    return np.argmax(cum >= target[..., None], axis=-1)


def mean_half_up(counts: np.ndarray) -> np.ndarray:
    """Mean score per row rounded half-up, in exact integer arithmetic."""
    n = counts.sum(axis=-1)
    total = (counts * np.arange(counts.shape[-1])).sum(axis=-1)
    return (2 * total + n) // (2 * n)


def plurality(counts: np.ndarray, priorities: np.ndarray) -> np.ndarray:
    """Mode per row; ties go to the tied score with the highest priority."""
    top = counts.max(axis=-1, keepdims=True)
    tied = counts == top
    return np.argmax(np.where(tied, priorities, -1.0), axis=-1)


def aggregate(table: RatingTable, raters: Iterable[str], policy: AggregationPolicy = AggregationPolicy()) -> GroupScoreTable:
    """Aggregate the selected raters' scores per item.

    Items without a rating from any selected rater are omitted.
    """
    raters = set(raters)
    if not raters:
        raise ValueError("empty rater set")
    counts = score_counts(table, table.rater_mask(raters))
    support = counts.sum(axis=1)
    keep = np.flatnonzero(support > 0)
    counts, support = counts[keep], support[keep]
    item_ids = tuple(table.item_ids[i] for i in keep)

    if policy.kind == "median":
        scores = lower_median(counts)
    elif policy.kind == "mean":
        scores = mean_half_up(counts)
    else:
        top = counts.max(axis=1, keepdims=True)
        n_tied = (counts == top).sum(axis=1)
        scores = np.argmax(counts, axis=1)
        tied_rows = np.flatnonzero(n_tied > 1)
        if len(tied_rows):
            prio = tie_priorities([item_ids[i] for i in tied_rows], table.scale.k_max, policy.seed)
            scores[tied_rows] = plurality(counts[tied_rows], prio)
    return GroupScoreTable(table.scale, item_ids, scores.astype(np.int64), support.astype(np.int64))
