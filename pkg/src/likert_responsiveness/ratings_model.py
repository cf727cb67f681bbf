"""Domain types and ingestion for ordinal rating tables.

Canonical on-disk formats (UTF-8, comma separated, header required)::

    ratings     item_id,rater_id,score
    binary      item_id,rater_id,label
    attributes  rater_id,<axis1>,<axis2>,...
    items       item_id,<tag1>,<tag2>,...

Missing ratings are allowed; the item x rater matrix may be sparse.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np


class InputError(ValueError):
    """Invalid input data. ``line`` is the 1-based file line when known."""

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class DataWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LikertScale:
    """Integer scale ``0..k_max``."""

    k_max: int

    def __post_init__(self):
        if int(self.k_max) != self.k_max or self.k_max < 1:
            raise ValueError(f"k_max must be an integer >= 1, got {self.k_max!r}")

    @property
    def values(self) -> range:
        return range(self.k_max + 1)

    @property
    def n_points(self) -> int:
        return self.k_max + 1

    def __contains__(self, score) -> bool:
        return isinstance(score, (int, np.integer)) and 0 <= score <= self.k_max


@dataclass(frozen=True)
class RatingRecord:
    item_id: str
    rater_id: str
    score: int


@dataclass(frozen=True)
class BinaryRecord:
    item_id: str
    rater_id: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class RaterAttributes:
    rater_id: str
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if any(not axis for axis in self.attributes):
            raise ValueError("attribute axis names must be non-empty")


@dataclass(frozen=True)
class ItemMeta:
    item_id: str
    tags: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class GroupKey:
    """Conjunction of ``(axis, category)`` selectors; empty means all raters.

    Selectors are kept sorted by axis, so keys written in any order compare equal.
    """

    selectors: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        sel = tuple(sorted((str(a), str(c)) for a, c in self.selectors))
        object.__setattr__(self, "selectors", sel)
        axes = [a for a, _ in sel]
        if len(set(axes)) != len(axes):
            raise ValueError(f"duplicate axis in group key: {axes}")

    @classmethod
    def parse(cls, text: str) -> "GroupKey":
        """Parse ``"axis=value,axis=value"``; ``""`` or ``"all"`` is the empty key."""
        text = text.strip()
        if text in ("", "all"):
            return cls(())
        selectors = []
        for part in text.split(","):
            axis, sep, value = part.partition("=")
            if not sep or not axis.strip():
                raise ValueError(f"malformed group selector {part!r}; expected axis=value")
            selectors.append((axis.strip(), value.strip()))
        return cls(tuple(selectors))

    @property
    def label(self) -> str:
        if not self.selectors:
            return "all"
        return ",".join(f"{a}={c}" for a, c in self.selectors)

    def __str__(self) -> str:
        return self.label


class RatingTable:
    """Immutable long-format ordinal ratings with a declared scale.

    Records are held in canonical order (sorted by item id, then rater id), so
    two tables built from the same set of rows compare equal regardless of
    input order.
    """

    def __init__(self, records: Iterable[RatingRecord], scale: LikertScale):
        self.scale = scale
        rows = sorted(records, key=lambda r: (r.item_id, r.rater_id))
        seen = set()
        for r in rows:
            if r.score not in scale:
                raise InputError(f"score out of range 0..{scale.k_max}: {r.score!r} (item {r.item_id}, rater {r.rater_id})")
            key = (r.item_id, r.rater_id)
            if key in seen:
                raise InputError(f"duplicate (item, rater) pair: {key}")
            seen.add(key)
        self.item_ids: tuple[str, ...] = tuple(sorted({r.item_id for r in rows}))
        self.rater_ids: tuple[str, ...] = tuple(sorted({r.rater_id for r in rows}))
        item_pos = {v: i for i, v in enumerate(self.item_ids)}
        rater_pos = {v: i for i, v in enumerate(self.rater_ids)}
        self.item_idx = np.array([item_pos[r.item_id] for r in rows], dtype=np.int64)
        self.rater_idx = np.array([rater_pos[r.rater_id] for r in rows], dtype=np.int64)
        self.scores = np.array([r.score for r in rows], dtype=np.int64)
        for arr in (self.item_idx, self.rater_idx, self.scores):
            arr.flags.writeable = False

    @classmethod
    def from_dense(
        cls,
        matrix: np.ndarray,
        item_ids: Sequence[str],
        rater_ids: Sequence[str],
        scale: LikertScale,
    ) -> "RatingTable":
        """Build from an items x raters matrix; negative entries mean missing."""
        matrix = np.asarray(matrix)
        ii, rr = np.nonzero(matrix >= 0)
        return cls(
            (RatingRecord(item_ids[i], rater_ids[r], int(matrix[i, r])) for i, r in zip(ii, rr)),
            scale,
        )

    def __len__(self) -> int:
        return len(self.scores)

    def __iter__(self) -> Iterator[RatingRecord]:
        for i, r, s in zip(self.item_idx, self.rater_idx, self.scores):
            yield RatingRecord(self.item_ids[i], self.rater_ids[r], int(s))

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatingTable):
            return NotImplemented
        return (
            self.scale == other.scale
            and self.item_ids == other.item_ids
            and self.rater_ids == other.rater_ids
            and np.array_equal(self.item_idx, other.item_idx)
            and np.array_equal(self.rater_idx, other.rater_idx)
            and np.array_equal(self.scores, other.scores)
        )

    def __repr__(self) -> str:
        return (
            f"RatingTable(records={len(self)}, items={len(self.item_ids)}, "
            f"raters={len(self.rater_ids)}, k_max={self.scale.k_max})"
        )

    def summary(self) -> dict:
        return {"records": len(self), "items": len(self.item_ids), "raters": len(self.rater_ids)}

    @cached_property
    def dense(self) -> np.ndarray:
        """Items x raters score matrix with -1 for missing ratings."""
        out = np.full((len(self.item_ids), len(self.rater_ids)), -1, dtype=np.int64)
        out[self.item_idx, self.rater_idx] = self.scores
        out.flags.writeable = False
        return out

    @cached_property
    def _rater_pos(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.rater_ids)}

    @cached_property
    def _item_pos(self) -> dict[str, int]:
        return {r: i for i, r in enumerate(self.item_ids)}

    def rater_mask(self, raters: Iterable[str]) -> np.ndarray:
        """Boolean mask over ``rater_ids``; unknown raters are ignored."""
        mask = np.zeros(len(self.rater_ids), dtype=bool)
        for r in raters:
            pos = self._rater_pos.get(r)
            if pos is not None:
                mask[pos] = True
        return mask

    def item_index(self, item_id: str) -> int | None:
        return self._item_pos.get(item_id)

    def subset_items(self, keep: Iterable[str]) -> "RatingTable":
        keep = set(keep)
        return RatingTable((r for r in self if r.item_id in keep), self.scale)

    def without_raters(self, drop: Iterable[str]) -> "RatingTable":
        drop = set(drop)
        return RatingTable((r for r in self if r.rater_id not in drop), self.scale)


# --------------------------------------------------------------------------
# CSV / JSONL ingestion


def _open_csv(path: str | Path, required: Sequence[str]) -> tuple[list[str], Iterator[tuple[int, list[str]]]]:
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        fh.close()
        raise InputError("missing header row", path=str(path), line=1)
    header = [h.strip() for h in header]
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    missing = [c for c in required if c not in header]
    if missing:
        fh.close()
        raise InputError(f"missing header column(s) {missing}; got {header}", path=str(path), line=1)

    def rows():
        with fh:
            for row in reader:
                if not row or all(not c.strip() for c in row):
                    continue
                yield reader.line_num, row

    return header, rows()


def _parse_int(text: str, what: str, path, line) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise InputError(f"malformed row: {what} {text!r} is not an integer", path=str(path), line=line) from None


def load_ratings(path: str | Path, scale: LikertScale) -> RatingTable:
    """Load and validate a ratings CSV (``item_id,rater_id,score``)."""
    header, rows = _open_csv(path, ("item_id", "rater_id", "score"))
    ci, cr, cs = (header.index(c) for c in ("item_id", "rater_id", "score"))
    records = []
    seen: dict[tuple[str, str], int] = {}
    for line, row in rows:
        if len(row) != len(header):
            raise InputError(f"malformed row: expected {len(header)} fields, got {len(row)}", path=str(path), line=line)
        item, rater = row[ci].strip(), row[cr].strip()
        if not item or not rater:
            raise InputError("malformed row: empty item_id or rater_id", path=str(path), line=line)
        score = _parse_int(row[cs], "score", path, line)
        if not 0 <= score <= scale.k_max:
            raise InputError(f"score out of range 0..{scale.k_max}: {score}", path=str(path), line=line)
        if (item, rater) in seen:
            raise InputError(
                f"duplicate (item, rater) ({item}, {rater}); first seen on line {seen[(item, rater)]}",
                path=str(path),
                line=line,
            )
        seen[(item, rater)] = line
        records.append(RatingRecord(item, rater, score))
    return RatingTable(records, scale)


def load_ratings_jsonl(path: str | Path, scale: LikertScale) -> RatingTable:
    """JSON-lines mirror of :func:`load_ratings`; one object per line."""
    path = Path(path)
    if not path.exists():
        raise InputError("file not found", path=str(path))
    records = []
    seen = set()
    with path.open(encoding="utf-8") as fh:
        for line, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
                item, rater, score = str(obj["item_id"]), str(obj["rater_id"]), obj["score"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise InputError(f"malformed row: {exc}", path=str(path), line=line) from None
            if not isinstance(score, int) or isinstance(score, bool):
                raise InputError(f"malformed row: score {score!r} is not an integer", path=str(path), line=line)
            if not 0 <= score <= scale.k_max:
                raise InputError(f"score out of range 0..{scale.k_max}: {score}", path=str(path), line=line)
            if (item, rater) in seen:
                raise InputError(f"duplicate (item, rater) ({item}, {rater})", path=str(path), line=line)
            seen.add((item, rater))
            records.append(RatingRecord(item, rater, score))
    return RatingTable(records, scale)


def load_binary(path: str | Path) -> list[BinaryRecord]:
    """Load trained-rater labels (``item_id,rater_id,label``)."""
    header, rows = _open_csv(path, ("item_id", "rater_id", "label"))
    ci, cr, cl = (header.index(c) for c in ("item_id", "rater_id", "label"))
    out = []
    for line, row in rows:
        if len(row) != len(header):
            raise InputError(f"malformed row: expected {len(header)} fields, got {len(row)}", path=str(path), line=line)
        item, rater = row[ci].strip(), row[cr].strip()
        if not item or not rater:
            raise InputError("malformed row: empty item_id or rater_id", path=str(path), line=line)
        label = row[cl].strip()
        if label not in ("0", "1"):
            raise InputError(f"label must be 0 or 1, got {label!r}", path=str(path), line=line)
        out.append(BinaryRecord(item, rater, int(label)))
    if not out:
        warnings.warn(f"{path}: no binary labels (header only)", DataWarning, stacklevel=2)
    return out


def _load_keyed(path, key_col: str) -> list[tuple[str, dict[str, str]]]:
    header, rows = _open_csv(path, (key_col,))
    kc = header.index(key_col)
    other = [(i, h) for i, h in enumerate(header) if i != kc]
    if any(not h for _, h in other):
        raise InputError("empty column name in header", path=str(path), line=1)
    out = []
    seen = set()
    for line, row in rows:
        if len(row) != len(header):
            raise InputError(f"malformed row: expected {len(header)} fields, got {len(row)}", path=str(path), line=line)
        key = row[kc].strip()
        if not key:
            raise InputError(f"malformed row: empty {key_col}", path=str(path), line=line)
        if key in seen:
            raise InputError(f"duplicate {key_col} {key!r}", path=str(path), line=line)
        seen.add(key)
        out.append((key, {h: row[i].strip() for i, h in other if row[i].strip()}))
    return out


def load_attributes(path: str | Path) -> list[RaterAttributes]:
    """Load rater attributes (``rater_id,<axis>...``); empty cells mean unknown."""
    return [RaterAttributes(k, v) for k, v in _load_keyed(path, "rater_id")]


def load_items(path: str | Path) -> list[ItemMeta]:
    return [ItemMeta(k, v) for k, v in _load_keyed(path, "item_id")]


# --------------------------------------------------------------------------
# Export (inverse of the loaders; canonical order)


def _write_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def export_ratings(table: RatingTable, path: str | Path) -> None:
    _write_rows(path, ("item_id", "rater_id", "score"), ((r.item_id, r.rater_id, r.score) for r in table))


def export_binary(records: Iterable[BinaryRecord], path: str | Path) -> None:
    rows = sorted((r.item_id, r.rater_id, r.label) for r in records)
    _write_rows(path, ("item_id", "rater_id", "label"), rows)


def _export_keyed(path, key_col, entries: list[tuple[str, Mapping[str, str]]]) -> None:
    cols = sorted({c for _, d in entries for c in d})
    rows = ([k] + [d.get(c, "") for c in cols] for k, d in sorted(entries, key=lambda e: e[0]))
    _write_rows(path, [key_col] + cols, rows)


def export_attributes(attrs: Iterable[RaterAttributes], path: str | Path) -> None:
    _export_keyed(path, "rater_id", [(a.rater_id, a.attributes) for a in attrs])


def export_items(items: Iterable[ItemMeta], path: str | Path) -> None:
    _export_keyed(path, "item_id", [(m.item_id, m.tags) for m in items])


# --------------------------------------------------------------------------
# Group selection


def select_raters(attrs: Iterable[RaterAttributes], key: GroupKey) -> set[str]:
    """Raters matching every selector of ``key``; the empty key selects all."""
    attrs = list(attrs)
    known_axes = {axis for a in attrs for axis in a.attributes}
    unknown = [axis for axis, _ in key.selectors if axis not in known_axes]
    if unknown:
        raise KeyError(f"unknown attribute axis {unknown[0]!r}; known axes: {sorted(known_axes)}")
    return {
        a.rater_id
        for a in attrs
        if all(a.attributes.get(axis) == value for axis, value in key.selectors)
    }


def trisection_keys(attrs: Iterable[RaterAttributes], axes: Sequence[str]) -> list[GroupKey]:
    """Every observed combination of values over ``axes``, sorted."""
    combos = set()
    for a in attrs:
        vals = [a.attributes.get(axis) for axis in axes]
        if all(v is not None for v in vals):
            combos.add(tuple(zip(axes, vals)))
    return [GroupKey(c) for c in sorted(combos)]
