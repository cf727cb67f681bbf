"""Monotonic Precision Area, Weighted Recall Area and their harmonic mean.

For a pair set of evaluated scores ``S`` on a ``0..K`` scale against a binary
reference ``U``:

* ``Precision(s) = P(U=1 | S=s)``, undefined when score ``s`` is unused.
* ``Y_so(s)`` sums, over every used score ``i < s``, the gap between
  ``Precision(s)`` and the running maximum of the defined precisions up to
  ``i``. It is 0 when ``s`` is unused or no earlier score is used. MPA is the
  trapezoidal area of ``Y_so`` over ``x = 0..K+1`` (a terminal 0 appended),
  divided by ``ceil((K+1)/2) * floor((K+1)/2)`` and floored at 0.
* ``Y_d(s) = P(S<s | U=0) * P(S=s | U=1)``; WRA is its trapezoidal area over
  the same grid, unnormalised.

All kernels accept count arrays with arbitrary leading batch dimensions and a
trailing score axis of length ``K+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ratings_model import LikertScale
from .reference import ReferencePairSet

CURVE_KINDS = ("precision", "recall", "y_so", "y_d")


def _trapezoid(y: np.ndarray) -> np.ndarray:
    # unit-spaced x = 0..len-1
    return 0.5 * (y[..., 1:] + y[..., :-1]).sum(axis=-1)


def max_area(k_max: int) -> int:
    n = k_max + 1
    return math.ceil(n / 2) * math.floor(n / 2)


def precision_curve(n1: np.ndarray, n: np.ndarray) -> np.ndarray:
    """``n1/n`` per score, NaN where the score is unused."""
    n1 = np.asarray(n1, dtype=float)
    n = np.asarray(n, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, n1 / np.where(n > 0, n, 1.0), np.nan)


def y_so_curve(n1: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Monotonicity-penalised precision gains at ``s = 0..K`` (no terminal point)."""
    prec = precision_curve(n1, n)
    used = np.asarray(n) > 0
    batch = prec.shape[:-1]
    y = np.zeros(prec.shape)
    running_max = np.full(batch, -np.inf)
    sum_running_max = np.zeros(batch)
    n_used = np.zeros(batch)
    for s in range(prec.shape[-1]):
        p = prec[..., s]
        here = used[..., s]
        y[..., s] = np.where(here & (n_used > 0), n_used * np.where(here, p, 0.0) - sum_running_max, 0.0)
        running_max = np.where(here, np.fmax(running_max, np.where(here, p, -np.inf)), running_max)
        sum_running_max = sum_running_max + np.where(here, running_max, 0.0)
        n_used = n_used + here
    return y


def y_d_curve(n1: np.ndarray, n0: np.ndarray) -> np.ndarray:
    """``P(S<s | U=0) * P(S=s | U=1)`` at ``s = 0..K``; 0 when a class is empty."""
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    u1 = n1.sum(axis=-1, keepdims=True)
    u0 = n0.sum(axis=-1, keepdims=True)
    below0 = np.cumsum(n0, axis=-1) - n0
    with np.errstate(invalid="ignore", divide="ignore"):
        zero_recall = np.where(u0 > 0, below0 / np.where(u0 > 0, u0, 1.0), 0.0)
        one_recall = np.where(u1 > 0, n1 / np.where(u1 > 0, u1, 1.0), 0.0)
    return zero_recall * one_recall


def _with_terminal(y: np.ndarray) -> np.ndarray:
    return np.concatenate([y, np.zeros(y.shape[:-1] + (1,))], axis=-1)


def mpa_values(n1: np.ndarray, n0: np.ndarray) -> np.ndarray:
    n1 = np.asarray(n1, dtype=float)
    n = n1 + np.asarray(n0, dtype=float)
    area = _trapezoid(_with_terminal(y_so_curve(n1, n)))
    return np.maximum(area / max_area(n.shape[-1] - 1), 0.0)


def wra_values(n1: np.ndarray, n0: np.ndarray) -> np.ndarray:
    return _trapezoid(_with_terminal(y_d_curve(n1, n0)))


def hm_values(mpa: np.ndarray, wra: np.ndarray) -> np.ndarray:
    mpa = np.asarray(mpa, dtype=float)
    wra = np.asarray(wra, dtype=float)
    denom = mpa + wra
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > 0, 2 * mpa * wra / np.where(denom > 0, denom, 1.0), 0.0)


def responsiveness_values(n1: np.ndarray, n0: np.ndarray) -> dict[str, np.ndarray]:
    """Batched ``{mpa, wra, hm}`` from per-score counts."""
    mpa = mpa_values(n1, n0)
    wra = wra_values(n1, n0)
    return {"mpa": mpa, "wra": wra, "hm": hm_values(mpa, wra)}


# --------------------------------------------------------------------------
# Typed API


@dataclass(frozen=True, eq=False)
class ScoreConfusion:
    scale: LikertScale
    n1: np.ndarray
    n0: np.ndarray

    def __post_init__(self):
        if self.n1.shape != (self.scale.n_points,) or self.n0.shape != (self.scale.n_points,):
            raise ValueError("count vectors must have length K+1")

    @property
    def n(self) -> np.ndarray:
        return self.n1 + self.n0

    @property
    def u1(self) -> int:
        return int(self.n1.sum())

    @property
    def u0(self) -> int:
        return int(self.n0.sum())

    @classmethod
    def from_counts(cls, scale: LikertScale, n: Sequence[int], n1: Sequence[int]) -> "ScoreConfusion":
        n = np.asarray(n, dtype=np.int64)
        n1 = np.asarray(n1, dtype=np.int64)
        if np.any(n1 > n) or np.any(n1 < 0):
            raise ValueError("need 0 <= n1 <= n per score")
        return cls(scale, n1, n - n1)


@dataclass(frozen=True, eq=False)
class CurvePoints:
    kind: str
    xs: np.ndarray
    ys: np.ndarray


@dataclass(frozen=True, eq=False)
class BoundaryResult:
    boundary: int | None
    mpa: float
    wra: float
    hm: float
    pair_count: int
    curves: dict[str, CurvePoints] = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class ResponsivenessResult:
    mpa: float
    wra: float
    hm: float
    pair_count: int
    curves: dict[str, CurvePoints]
    per_boundary: list[BoundaryResult] = field(default_factory=list)


def confusion(pairs: ReferencePairSet, scale: LikertScale | None = None) -> ScoreConfusion:
    scale = scale or pairs.scale
    if pairs.pair_count == 0:
        raise ValueError("empty pair set")
    if len(pairs.s) and (pairs.s.min() < 0 or pairs.s.max() > scale.k_max):
        raise ValueError("pair score outside scale")
    k1 = scale.n_points
    n1 = np.bincount(pairs.s, weights=pairs.count * (pairs.u == 1), minlength=k1).astype(np.int64)
    n0 = np.bincount(pairs.s, weights=pairs.count * (pairs.u == 0), minlength=k1).astype(np.int64)
    return ScoreConfusion(scale, n1, n0)


def precision_at(c: ScoreConfusion, s: int) -> float:
    """``P(U=1 | S=s)``; NaN marks an unused score."""
    n = int(c.n[s])
    return c.n1[s] / n if n else math.nan


def mpa(c: ScoreConfusion) -> tuple[float, CurvePoints]:
    y = _with_terminal(y_so_curve(c.n1, c.n))
    return float(mpa_values(c.n1, c.n0)), CurvePoints("y_so", np.arange(len(y)), y)


def wra(c: ScoreConfusion) -> tuple[float, CurvePoints]:
    y = _with_terminal(y_d_curve(c.n1, c.n0))
    return float(wra_values(c.n1, c.n0)), CurvePoints("y_d", np.arange(len(y)), y)


def harmonic_mean(mpa: float, wra: float) -> float:
    return float(hm_values(mpa, wra))


def curves(c: ScoreConfusion) -> dict[str, CurvePoints]:
    xs = np.arange(c.scale.n_points)
    with np.errstate(invalid="ignore", divide="ignore"):
        recall = c.n1 / c.u1 if c.u1 else np.full(len(xs), np.nan)
    return {
        "precision": CurvePoints("precision", xs, precision_curve(c.n1, c.n)),
        "recall": CurvePoints("recall", xs, np.asarray(recall, dtype=float)),
        "y_so": mpa(c)[1],
        "y_d": wra(c)[1],
    }


def evaluate_pairs(pairs: ReferencePairSet) -> BoundaryResult:
    c = confusion(pairs)
    m, w = mpa(c)[0], wra(c)[0]
    return BoundaryResult(
        pairs.boundary.t if pairs.boundary else None,
        m, w, harmonic_mean(m, w), pairs.pair_count, curves(c),
    )


def evaluate_unit(pairs_by_boundary: Sequence[ReferencePairSet]) -> ResponsivenessResult:
    """Metrics for one evaluated unit, macro-averaged over boundaries.

    A single (guideline) pair set is returned as-is; several (crowd) pair sets
    give the unweighted mean of each metric plus the per-boundary breakdown.
    """
    if not pairs_by_boundary:
        raise ValueError("no pair sets to evaluate")
    parts = [evaluate_pairs(p) for p in pairs_by_boundary]
    if len(parts) == 1 and parts[0].boundary is None:
        only = parts[0]
        return ResponsivenessResult(only.mpa, only.wra, only.hm, only.pair_count, only.curves, [])
    return ResponsivenessResult(
        float(np.mean([p.mpa for p in parts])),
        float(np.mean([p.wra for p in parts])),
        float(np.mean([p.hm for p in parts])),
        max(p.pair_count for p in parts),
        {},
        parts,
    )
