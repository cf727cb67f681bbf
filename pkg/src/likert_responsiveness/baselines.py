"""Traditional comparison metrics on the same (S, U) pairs.

Because U is binary, every metric here is a function of the ordered
contingency table of S against U. The array entry points sort the distinct
scores once (``np.unique``) and then sweep the table, so the cost is
O(n log n) in the number of pairs; the batched kernels take per-category
counts directly.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .aggregation import GroupScoreTable
from .reference import ReferencePairSet


def _below(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x, axis=-1) - x


def _above(x: np.ndarray) -> np.ndarray:
    return x.sum(axis=-1, keepdims=True) - np.cumsum(x, axis=-1)


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


# Kernels over ordered category counts (..., C); n1/n0 = counts with U=1/U=0.

def concordance_counts(n1, n0):
    """(concordant, discordant, tied-on-S) counts over positive-negative pairs."""
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    conc = (n1 * _below(n0)).sum(axis=-1)
    disc = (n1 * _above(n0)).sum(axis=-1)
    ties = (n1 * n0).sum(axis=-1)
    return conc, disc, ties


def tau_b_from_counts(n1, n0):
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    conc, disc, _ = concordance_counts(n1, n0)
    n = n1 + n0
    total = n.sum(axis=-1)
    u1, u0 = n1.sum(axis=-1), n0.sum(axis=-1)
    pairs = total * (total - 1) / 2
    tied_s = (n * (n - 1) / 2).sum(axis=-1)
    tied_u = u1 * (u1 - 1) / 2 + u0 * (u0 - 1) / 2
    return _safe_div(conc - disc, np.sqrt(np.maximum(pairs - tied_s, 0) * np.maximum(pairs - tied_u, 0)))


def tau_a_from_counts(n1, n0):
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    conc, disc, _ = concordance_counts(n1, n0)
    total = (n1 + n0).sum(axis=-1)
    u1, u0 = n1.sum(axis=-1), n0.sum(axis=-1)
    return np.where((u1 > 0) & (u0 > 0), _safe_div(conc - disc, total * (total - 1) / 2), np.nan)


def auroc_from_counts(n1, n0):
    conc, _, ties = concordance_counts(n1, n0)
    u1 = np.asarray(n1, dtype=float).sum(axis=-1)
    u0 = np.asarray(n0, dtype=float).sum(axis=-1)
    return _safe_div(conc + 0.5 * ties, u1 * u0)


def aucpr_from_counts(n1, n0):
    """Non-interpolated average precision, thresholds swept from the top score down."""
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    tp = np.cumsum(n1[..., ::-1], axis=-1)
    fp = np.cumsum(n0[..., ::-1], axis=-1)
    u1 = n1.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(tp + fp > 0, tp / np.where(tp + fp > 0, tp + fp, 1.0), 0.0)
        gain = np.where(u1 > 0, n1[..., ::-1] / np.where(u1 > 0, u1, 1.0), 0.0)
    ap = (gain * prec).sum(axis=-1)
    return np.where(u1[..., 0] > 0, ap, np.nan)


def spearman_from_counts(n1, n0):
    """Pearson correlation of midranks."""
    n1 = np.asarray(n1, dtype=float)
    n0 = np.asarray(n0, dtype=float)
    n = n1 + n0
    total = n.sum(axis=-1, keepdims=True)
    rank_s = np.cumsum(n, axis=-1) - (n - 1) / 2
    u1 = n1.sum(axis=-1, keepdims=True)
    u0 = n0.sum(axis=-1, keepdims=True)
    rank_u0 = (u0 + 1) / 2
    rank_u1 = u0 + (u1 + 1) / 2
    mean = (total + 1) / 2
    ds = rank_s - mean
    cov = (n0 * ds * (rank_u0 - mean) + n1 * ds * (rank_u1 - mean)).sum(axis=-1)
    var_s = (n * ds**2).sum(axis=-1)
    var_u = (u0 * (rank_u0 - mean) ** 2 + u1 * (rank_u1 - mean) ** 2)[..., 0]
    return _safe_div(cov, np.sqrt(var_s * var_u))


# Array entry points --------------------------------------------------------

def contingency(s, u, weights=None) -> tuple[np.ndarray, np.ndarray]:
    """Counts with U=1 and U=0 per distinct score, scores ascending."""
    s = np.asarray(s)
    u = np.asarray(u)
    if s.shape != u.shape:
        raise ValueError("s and u must have the same length")
    if not np.isin(u, (0, 1)).all():
        raise ValueError("reference must be binary")
    w = np.ones(len(s)) if weights is None else np.asarray(weights, dtype=float)
    _, inv = np.unique(s, return_inverse=True)
    m = int(inv.max()) + 1 if len(inv) else 0
    n1 = np.bincount(inv, weights=w * (u == 1), minlength=m)
    n0 = np.bincount(inv, weights=w * (u == 0), minlength=m)
    return n1, n0


def _degenerate(n1, n0) -> bool:
    n = n1 + n0
    return (n > 0).sum() < 2 or n1.sum() == 0 or n0.sum() == 0


def kendall_tau_b(s, u, weights=None) -> float:
    """Kendall's tau-b; NaN when either variable is constant."""
    n1, n0 = contingency(s, u, weights)
    if _degenerate(n1, n0):
        return math.nan
    return float(tau_b_from_counts(n1, n0))


def kendall_tau_a(s, u, weights=None) -> float:
    n1, n0 = contingency(s, u, weights)
    if n1.sum() + n0.sum() < 2:
        return math.nan
    return float(tau_a_from_counts(n1, n0))


def spearman_rho(s, u, weights=None) -> float:
    n1, n0 = contingency(s, u, weights)
    if _degenerate(n1, n0):
        return math.nan
    return float(spearman_from_counts(n1, n0))


def auroc(s, u, weights=None) -> float:
    n1, n0 = contingency(s, u, weights)
    if n1.sum() == 0 or n0.sum() == 0:
        return math.nan
    return float(auroc_from_counts(n1, n0))


def aucpr(s, u, weights=None) -> float:
    n1, n0 = contingency(s, u, weights)
    if n1.sum() == 0:
        return math.nan
    return float(aucpr_from_counts(n1, n0))


def mokken_h(unit_scores: GroupScoreTable | Mapping[str, float], rest_scores: Mapping[str, float]) -> float:
    """Unit-versus-rest scalability: ``cov(S, R) / cov(sorted S, sorted R)``.

    ``rest_scores`` maps item id to the mean score of the raters outside the
    evaluated unit. NaN when fewer than two shared items or the maximal
    covariance is zero.
    """
    entries = unit_scores.entries if isinstance(unit_scores, GroupScoreTable) else unit_scores
    shared = [i for i in entries if i in rest_scores]
    if len(shared) < 2:
        return math.nan
    s = np.array([entries[i][0] if isinstance(entries[i], tuple) else entries[i] for i in shared], dtype=float)
    r = np.array([rest_scores[i] for i in shared], dtype=float)
    cov = np.mean((s - s.mean()) * (r - r.mean()))
    cov_max = np.mean((np.sort(s) - s.mean()) * (np.sort(r) - r.mean()))
    if cov_max <= 1e-15:
        return math.nan
    return float(cov / cov_max)


# Result bundle ---------------------------------------------------------------

@dataclass(frozen=True)
class BaselineResult:
    tau_b: float | None
    tau_a: float | None
    spearman_rho: float | None
    auroc: float | None
    aucpr: float | None
    mokken_h: float | None = None
    irt_alpha: float | None = None  # externally computed; never estimated here

    def as_dict(self) -> dict:
        return asdict(self)


def _none_if_nan(x: float) -> float | None:
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else float(x)


def evaluate_baselines(pairs: ReferencePairSet, mokken: float | None = None) -> BaselineResult:
    w = pairs.count
    return BaselineResult(
        tau_b=_none_if_nan(kendall_tau_b(pairs.s, pairs.u, w)),
        tau_a=_none_if_nan(kendall_tau_a(pairs.s, pairs.u, w)),
        spearman_rho=_none_if_nan(spearman_rho(pairs.s, pairs.u, w)),
        auroc=_none_if_nan(auroc(pairs.s, pairs.u, w)),
        aucpr=_none_if_nan(aucpr(pairs.s, pairs.u, w)),
        mokken_h=_none_if_nan(mokken),
    )


def macro_baselines(results: Sequence[BaselineResult]) -> BaselineResult:
    """Mean of each field over the results where it is defined."""
    def avg(name):
        vals = [getattr(r, name) for r in results if getattr(r, name) is not None]
        return float(np.mean(vals)) if vals else None

    return BaselineResult(
        tau_b=avg("tau_b"), tau_a=avg("tau_a"), spearman_rho=avg("spearman_rho"),
        auroc=avg("auroc"), aucpr=avg("aucpr"), mokken_h=avg("mokken_h"),
    )
