"""Binary reference construction.

A pair set is held in compact form: one row per ``(item, s, u)`` with a
multiplicity ``count``, which is equivalent to the fully expanded list of
``(S, U)`` instances but lets resampling reweight items cheaply.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .aggregation import GroupScoreTable
from .ratings_model import BinaryRecord, LikertScale, RatingTable

log = logging.getLogger(__name__)

GUIDELINE = "guideline"
CROWD = "crowd"


@dataclass(frozen=True)
class ReferencePair:
    item_id: str
    s: int
    u: int


@dataclass(frozen=True)
class Boundary:
    t: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"boundary must be >= 1, got {self.t}")


@dataclass(frozen=True, eq=False)
class ReferencePairSet:
    scale: LikertScale
    item_ids: tuple[str, ...]
    item: np.ndarray
    s: np.ndarray
    u: np.ndarray
    count: np.ndarray
    reference_kind: str
    boundary: Boundary | None = None
    evaluated_unit: str = ""

    def __post_init__(self):
        if self.reference_kind not in (GUIDELINE, CROWD):
            raise ValueError(f"unknown reference kind {self.reference_kind!r}")
        if (self.boundary is None) != (self.reference_kind == GUIDELINE):
            raise ValueError("boundary is required for crowd references and forbidden otherwise")
        if self.boundary is not None and self.boundary.t > self.scale.k_max:
            raise ValueError(f"boundary {self.boundary.t} outside 1..{self.scale.k_max}")

    @property
    def pair_count(self) -> int:
        return int(self.count.sum())

    @property
    def pairs(self) -> list[ReferencePair]:
        """Fully expanded ``(item, s, u)`` instances."""
        out = []
        for i, s, u, c in zip(self.item, self.s, self.u, self.count):
            out.extend([ReferencePair(self.item_ids[i], int(s), int(u))] * int(c))
        return out

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Expanded ``(s, u)`` vectors."""
        return np.repeat(self.s, self.count), np.repeat(self.u, self.count)

    def reweighted(self, multiplicity: np.ndarray) -> "ReferencePairSet":
        """Replicate each item's pairs ``multiplicity[item]`` times."""
        count = self.count * multiplicity[self.item]
        keep = count > 0
        return ReferencePairSet(
            self.scale, self.item_ids, self.item[keep], self.s[keep], self.u[keep], count[keep],
            self.reference_kind, self.boundary, self.evaluated_unit,
        )

    def dump_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("item_id", "s", "u"))
            for p in self.pairs:
                w.writerow((p.item_id, p.s, p.u))


def _pair_set(scale, item_ids, s, n1, n0, kind, boundary, unit, collapse) -> ReferencePairSet:
    """Build a compact pair set from per-item (s, n1, n0)."""
    if collapse:
        u = (n1 > n0).astype(np.int64)
        n_items = len(item_ids)
        return ReferencePairSet(
            scale, tuple(item_ids), np.arange(n_items), s.copy(), u, np.ones(n_items, dtype=np.int64),
            kind, boundary, unit,
        )
    idx = np.arange(len(item_ids))
    item = np.concatenate([idx, idx])
    ss = np.concatenate([s, s])
    uu = np.concatenate([np.ones_like(s), np.zeros_like(s)])
    cc = np.concatenate([n1, n0])
    keep = cc > 0
    order = np.lexsort((1 - uu[keep], item[keep]))
    return ReferencePairSet(
        scale, tuple(item_ids), item[keep][order], ss[keep][order], uu[keep][order], cc[keep][order],
        kind, boundary, unit,
    )


@dataclass(frozen=True, eq=False)
class LabelCounts:
    """Per-item counts of trained-rater labels."""

    item_ids: tuple[str, ...]
    n1: np.ndarray
    n0: np.ndarray

    @classmethod
    def from_records(cls, binary: Iterable[BinaryRecord]) -> "LabelCounts":
        tally: dict[str, list[int]] = {}
        for rec in binary:
            tally.setdefault(rec.item_id, [0, 0])[rec.label] += 1
        items = tuple(sorted(tally))
        return cls(
            items,
            np.array([tally[i][1] for i in items], dtype=np.int64),
            np.array([tally[i][0] for i in items], dtype=np.int64),
        )


def guideline_pairs(
    group_scores: GroupScoreTable,
    binary: Iterable[BinaryRecord] | LabelCounts,
    *,
    unit: str = "",
    collapse: bool = False,
) -> ReferencePairSet:
    """Pair each trained label on an item with the unit's score on that item.

    With ``collapse=True`` each item contributes one pair whose ``u`` is the
    strict majority of its trained labels (ties give 0).
    """
    labels = binary if isinstance(binary, LabelCounts) else LabelCounts.from_records(binary)
    pos = {item: k for k, item in enumerate(labels.item_ids)}
    rows = [(k, pos[item]) for k, item in enumerate(group_scores.item_ids) if item in pos]
    if not rows:
        raise ValueError("no items shared between group scores and trained labels")
    gi = np.array([r[0] for r in rows])
    li = np.array([r[1] for r in rows])
    return _pair_set(
        group_scores.scale,
        [group_scores.item_ids[k] for k in gi],
        group_scores.scores[gi],
        labels.n1[li],
        labels.n0[li],
        GUIDELINE,
        None,
        unit,
        collapse,
    )


def all_boundaries(scale: LikertScale) -> list[Boundary]:
    return [Boundary(t) for t in range(1, scale.k_max + 1)]


def crowd_pairs_all(
    table: RatingTable,
    evaluated_raters: Iterable[str],
    unit_scores: GroupScoreTable,
    boundaries: Sequence[Boundary],
    *,
    unit: str = "",
    collapse: bool = False,
) -> list[ReferencePairSet]:
    """Crowd reference pair sets for several boundaries at once.

    Every rating by a rater outside ``evaluated_raters`` on an item the unit
    scored becomes one pair with ``u = rating >= t``. Items with no such
    rating are dropped.
    """
    evaluated = set(evaluated_raters)
    ref_mask = ~table.rater_mask(evaluated)
    if not ref_mask.any():
        raise ValueError("empty reference population: every rater is being evaluated")
    sel = ref_mask[table.rater_idx]
    hist = np.zeros((len(table.item_ids), table.scale.n_points), dtype=np.int64)
    np.add.at(hist, (table.item_idx[sel], table.scores[sel]), 1)

    rows, unit_rows = [], []
    dropped = 0
    for k, item in enumerate(unit_scores.item_ids):
        pos = table.item_index(item)
        if pos is None or hist[pos].sum() == 0:
            dropped += 1
            continue
        rows.append(pos)
        unit_rows.append(k)
    if dropped:
        log.debug("crowd reference for %s: dropped %d item(s) without reference ratings", unit or "unit", dropped)
    if not rows:
        raise ValueError("empty reference population: no reference ratings on the unit's items")
    h = hist[rows]
    at_least = np.cumsum(h[:, ::-1], axis=1)[:, ::-1]  # at_least[:, t] = #ratings >= t
    total = h.sum(axis=1)
    s = unit_scores.scores[unit_rows]
    items = [unit_scores.item_ids[k] for k in unit_rows]
    out = []
    for b in boundaries:
        if not 1 <= b.t <= table.scale.k_max:
            raise ValueError(f"boundary {b.t} outside 1..{table.scale.k_max}")
        n1 = at_least[:, b.t]
        out.append(_pair_set(table.scale, items, s, n1, total - n1, CROWD, b, unit, collapse))
    return out


def crowd_pairs(
    table: RatingTable,
    evaluated_raters: Iterable[str],
    unit_scores: GroupScoreTable,
    t: Boundary,
    *,
    unit: str = "",
    collapse: bool = False,
) -> ReferencePairSet:
    return crowd_pairs_all(table, evaluated_raters, unit_scores, [t], unit=unit, collapse=collapse)[0]


def rest_scores(table: RatingTable, evaluated_raters: Iterable[str], item_ids: Sequence[str]) -> dict[str, float]:
    """Mean score of the non-evaluated raters on each item (items without any are skipped)."""
    ref_mask = ~table.rater_mask(set(evaluated_raters))
    sel = ref_mask[table.rater_idx]
    n_items = len(table.item_ids)
    total = np.bincount(table.item_idx[sel], weights=table.scores[sel], minlength=n_items)
    n = np.bincount(table.item_idx[sel], minlength=n_items)
    out = {}
    for item in item_ids:
        pos = table.item_index(item)
        if pos is not None and n[pos] > 0:
            out[item] = float(total[pos] / n[pos])
    return out
