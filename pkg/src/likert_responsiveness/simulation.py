"""Synthetic rater populations with known latent severity.

Each item has a true severity ``V ~ N(0, 1)``; crowd rater ``j`` perceives
``V + b_j`` with ``b_j ~ N(0, sigma_b^2)``. Three scoring patterns are
generated from that world:

``normal``          per-rater equal-probability quantile thresholds on the
                    perceived severity (optionally jittered per item)
``downward_shift``  normal scores, with a share of scores >= 2 moved down
``conservative``    0 below a high per-rater cutoff, uniform 1..K above it

Trained raters label an item 1 iff ``V`` lies above their own percentile
``p_j`` of the severity sample (nearest-rank), with ``p_j`` drawn from a
normal distribution truncated to [50, 90].
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from ._rng import keyed_rng
from .inference import IntervalResult, item_multiplicities
from .pipeline import metrics_from_counts
from .ratings_model import BinaryRecord, LikertScale, RatingTable
from .reference import LabelCounts

PATTERNS = ("normal", "downward_shift", "conservative")
SCENARIO_METRICS = ("mpa", "wra", "hm", "tau_b", "spearman_rho", "auroc", "aucpr")
SHIFT_MODES = ("random_lower", "step")
PERCENTILE_RANGE = (50.0, 90.0)

_STD = NormalDist()


@dataclass(frozen=True)
class SimulationConfig:
    n_items: int = 1000
    n_crowd: int = 30
    n_trained: int = 30
    k_max: int = 4
    sigma_b: float = 0.5
    jitter: float = 0.5
    shift_proportion: float = 0.7
    shift_mode: str = "random_lower"
    conservative_quantile: float = 0.67
    trained_percentile_mean: float = 85.0
    trained_percentile_sd: float = 5.0
    trained_percentile_range: tuple[float, float] = PERCENTILE_RANGE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "trained_percentile_range", tuple(float(x) for x in self.trained_percentile_range))
        if min(self.n_items, self.n_crowd, self.n_trained) < 1:
            raise ValueError("n_items, n_crowd and n_trained must be >= 1")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.sigma_b < 0 or self.jitter < 0:
            raise ValueError("sigma_b and jitter must be >= 0")
        if not 0 <= self.shift_proportion <= 1:
            raise ValueError("shift_proportion must lie in [0, 1]")
        if self.shift_mode not in SHIFT_MODES:
            raise ValueError(f"shift_mode must be one of {SHIFT_MODES}")
        if not 0 < self.conservative_quantile < 1:
            raise ValueError("conservative_quantile must lie in (0, 1)")
        if self.trained_percentile_range != PERCENTILE_RANGE:
            raise ValueError("trained_percentile_range is fixed to [50, 90]")
        if self.trained_percentile_sd < 0:
            raise ValueError("trained_percentile_sd must be >= 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "SimulationConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown simulation setting(s): {unknown}")
        return cls(**data)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["trained_percentile_range"] = list(self.trained_percentile_range)
        return d


@dataclass(frozen=True)
class SimulatedItem:
    item_id: str
    v: float

    def __post_init__(self):
        if not math.isfinite(self.v):
            raise ValueError("severity must be finite")


@dataclass(frozen=True, eq=False)
class SimulatedRater:
    rater_id: str
    b: float
    thresholds: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.thresholds) <= 0):
            raise ValueError("thresholds must be strictly ascending")

    def score(self, perceived: np.ndarray) -> np.ndarray:
        """Number of thresholds strictly below each perceived severity."""
        return np.searchsorted(self.thresholds, perceived, side="left")


@dataclass(frozen=True)
class TrainedRater:
    rater_id: str
    percentile: float


@dataclass(frozen=True, eq=False)
class World:
    cfg: SimulationConfig
    items: tuple[SimulatedItem, ...]
    crowd: tuple[SimulatedRater, ...]
    trained: tuple[TrainedRater, ...]
    stream: tuple = ()

    @property
    def v(self) -> np.ndarray:
        return np.array([it.v for it in self.items])

    @property
    def item_ids(self) -> list[str]:
        return [it.item_id for it in self.items]

    def __iter__(self):
        return iter((self.items, self.crowd, self.trained))


def _width(digits: int) -> int:
    return max(1, len(str(digits - 1)))


def normal_thresholds(b: float, cfg: SimulationConfig) -> np.ndarray:
    """Equal-probability cut points of the perceived-severity marginal."""
    scale = math.sqrt(1 + cfg.jitter**2)
    q = [_STD.inv_cdf(k / (cfg.k_max + 1)) for k in range(1, cfg.k_max + 1)]
    return b + scale * np.array(q)


def _trained_percentile(cfg: SimulationConfig, j: int) -> float:
    rng = keyed_rng(cfg.seed, "trained-percentile", j)
    lo, hi = cfg.trained_percentile_range
    while True:
        p = rng.normal(cfg.trained_percentile_mean, cfg.trained_percentile_sd)
        if lo <= p <= hi:
            return float(p)


def generate_world(cfg: SimulationConfig, *, stream: Sequence[int | str] = ()) -> World:
    """Draw severities and both rater populations.

    Raters depend only on ``cfg``; ``stream`` selects an independent severity
    sample (and per-item noise) for the same rater population.
    """
    stream = tuple(stream)
    v = keyed_rng(cfg.seed, "severity", *stream).standard_normal(cfg.n_items)
    b = keyed_rng(cfg.seed, "tendency").normal(0.0, cfg.sigma_b, cfg.n_crowd) if cfg.sigma_b > 0 else np.zeros(cfg.n_crowd)
    w_i, w_c, w_t = _width(cfg.n_items), _width(cfg.n_crowd), _width(cfg.n_trained)
    items = tuple(SimulatedItem(f"i{i:0{w_i}d}", float(x)) for i, x in enumerate(v))
    crowd = tuple(SimulatedRater(f"c{j:0{w_c}d}", float(bj), normal_thresholds(float(bj), cfg)) for j, bj in enumerate(b))
    trained = tuple(TrainedRater(f"t{j:0{w_t}d}", _trained_percentile(cfg, j)) for j in range(cfg.n_trained))
    return World(cfg, items, crowd, trained, stream)


def perceived(world: World, rater: SimulatedRater, *, jitter: bool = True) -> np.ndarray:
    base = world.v + rater.b
    if not jitter or world.cfg.jitter == 0:
        return base
    noise = keyed_rng(world.cfg.seed, "jitter", rater.rater_id, *world.stream).standard_normal(len(base))
    return base + world.cfg.jitter * noise


def score_normal(world: World, rater: SimulatedRater) -> np.ndarray:
    return rater.score(perceived(world, rater))


def apply_downward_shift(scores: np.ndarray, world: World, rater: SimulatedRater) -> np.ndarray:
    """Move each score in ``2..K`` down with probability ``shift_proportion``.

    ``random_lower`` sends a moved score ``s`` to a uniform value in
    ``1..s-1``; ``step`` decrements it by one.
    """
    cfg = world.cfg
    rng = keyed_rng(cfg.seed, "shift", rater.rater_id, *world.stream)
    move = rng.random(len(scores)) < cfg.shift_proportion
    target = rng.random(len(scores))
    out = np.array(scores, dtype=np.int64)
    sel = move & (out >= 2)
    if cfg.shift_mode == "step":
        out[sel] -= 1
    else:
        out[sel] = 1 + np.floor(target[sel] * (out[sel] - 1)).astype(np.int64)
    return out


def apply_conservative(world: World, rater: SimulatedRater) -> np.ndarray:
    """0 unless the perceived severity clears the rater's high quantile, then uniform 1..K."""
    cfg = world.cfg
    cut = rater.b + _STD.inv_cdf(cfg.conservative_quantile)
    rng = keyed_rng(cfg.seed, "conservative", rater.rater_id, *world.stream)
    draw = rng.integers(1, cfg.k_max + 1, len(world.items))
    return np.where(perceived(world, rater, jitter=False) > cut, draw, 0).astype(np.int64)


def pattern_scores(world: World, rater: SimulatedRater, pattern: str) -> np.ndarray:
    if pattern == "normal":
        return score_normal(world, rater)
    if pattern == "downward_shift":
        return apply_downward_shift(score_normal(world, rater), world, rater)
    if pattern == "conservative":
        return apply_conservative(world, rater)
    raise ValueError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")


def nearest_rank(sorted_values: np.ndarray, percentile: float) -> float:
    n = len(sorted_values)
    rank = min(n, max(1, math.ceil(percentile / 100 * n)))
    return float(sorted_values[rank - 1])


def trained_labels(world: World, *, population: bool = False) -> np.ndarray:
    """Trained x items 0/1 matrix.

    With ``population=True`` the threshold is the percentile of ``N(0, 1)``
    instead of the empirical sample, which removes sampling noise from the
    reference in consistency studies.
    """
    v = world.v
    srt = np.sort(v)
    out = np.empty((len(world.trained), len(v)), dtype=np.int64)
    for j, t in enumerate(world.trained):
        thr = _STD.inv_cdf(t.percentile / 100) if population else nearest_rank(srt, t.percentile)
        out[j] = v > thr
    return out


def trained_reference(world: World) -> list[BinaryRecord]:
    labels = trained_labels(world)
    return [
        BinaryRecord(item.item_id, t.rater_id, int(labels[j, i]))
        for i, item in enumerate(world.items)
        for j, t in enumerate(world.trained)
    ]


def score_matrix(world: World, pattern: str | Mapping[str, str] = "normal") -> np.ndarray:
    """Crowd x items scores; ``pattern`` may map rater ids to patterns."""
    rows = []
    for r in world.crowd:
        p = pattern if isinstance(pattern, str) else pattern.get(r.rater_id, "normal")
        rows.append(pattern_scores(world, r, p))
    return np.array(rows, dtype=np.int64)


def crowd_table(world: World, pattern: str | Mapping[str, str] = "normal") -> RatingTable:
    scores = score_matrix(world, pattern)
    return RatingTable.from_dense(
        scores.T, world.item_ids, [r.rater_id for r in world.crowd], LikertScale(world.cfg.k_max),
    )


def label_counts(world: World, *, population: bool = False) -> LabelCounts:
    labels = trained_labels(world, population=population)
    n1 = labels.sum(axis=0)
    return LabelCounts(tuple(world.item_ids), n1, len(world.trained) - n1)


# Scenario study ---------------------------------------------------------------

def rater_confusions(scores: np.ndarray, n1: np.ndarray, n0: np.ndarray, k_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-rater guideline confusion counts, shape (raters, K+1)."""
    k1 = k_max + 1
    flat = (np.arange(len(scores))[:, None] * k1 + scores).ravel()
    size = len(scores) * k1
    c1 = np.bincount(flat, weights=np.tile(n1, len(scores)), minlength=size).reshape(-1, k1)
    c0 = np.bincount(flat, weights=np.tile(n0, len(scores)), minlength=size).reshape(-1, k1)
    return c1, c0


def _nanmean(x: np.ndarray, axis=None):
    with np.errstate(invalid="ignore"):
        n = (~np.isnan(x)).sum(axis=axis)
        return np.where(n > 0, np.nansum(x, axis=axis) / np.maximum(n, 1), np.nan)


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    cfg: SimulationConfig
    rater_ids: tuple[str, ...]
    per_rater: dict[str, dict[str, np.ndarray]]
    means: dict[str, dict[str, float]]
    intervals: dict[str, dict[str, IntervalResult]] = field(default_factory=dict)


def _scenario(world: World, pattern: str, n1, n0, trials: int, alpha: float):
    cfg = world.cfg
    scores = score_matrix(world, pattern)
    c1, c0 = rater_confusions(scores, n1, n0, cfg.k_max)
    values = metrics_from_counts(c1, c0, SCENARIO_METRICS)
    means = {k: float(_nanmean(v)) for k, v in values.items()}
    reps = {k: [] for k in SCENARIO_METRICS}
    for mult in item_multiplicities(len(n1), trials, cfg.seed):
        b1, b0 = rater_confusions(scores, n1 * mult, n0 * mult, cfg.k_max)
        for k, v in metrics_from_counts(b1, b0, SCENARIO_METRICS).items():
            reps[k].append(float(_nanmean(v)))
    intervals = {}
    for k in SCENARIO_METRICS:
        vals = np.array(reps[k])
        if trials == 0 or np.isnan(vals).all():
            intervals[k] = IntervalResult(means[k], math.nan, math.nan, trials, "no bootstrap trials" if trials == 0 else "undefined")
        else:
            lo, hi = np.percentile(vals[~np.isnan(vals)], [100 * alpha / 2, 100 * (1 - alpha / 2)])
            intervals[k] = IntervalResult(means[k], float(lo), float(hi), trials)
    return values, means, intervals


def run_scenarios(
    cfg: SimulationConfig = SimulationConfig(),
    *,
    bootstrap_trials: int = 100,
    alpha: float = 0.05,
    workers: int = 1,
    world: World | None = None,
) -> ScenarioResult:
    """Per-rater guideline metrics for every pattern, with across-rater means.

    Intervals are item-level percentile bootstraps of the across-rater mean.
    """
    world = world or generate_world(cfg)
    labels = label_counts(world)
    n1, n0 = labels.n1.astype(float), labels.n0.astype(float)

    def one(pattern):
        return _scenario(world, pattern, n1, n0, bootstrap_trials, alpha)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, PATTERNS))
    else:
        parts = [one(p) for p in PATTERNS]
    return ScenarioResult(
        cfg,
        tuple(r.rater_id for r in world.crowd),
        {p: part[0] for p, part in zip(PATTERNS, parts)},
        {p: part[1] for p, part in zip(PATTERNS, parts)},
        {p: part[2] for p, part in zip(PATTERNS, parts)},
    )


def directional_checks(means: Mapping[str, Mapping[str, float]]) -> dict[str, bool]:
    """The expected behaviour of each metric across patterns.

    ``traditional_follow_wra`` asks every traditional metric to drop under
    the downward shift (as wra does) and, under the conservative pattern, to
    move by less than mpa does.
    """
    nm, sh, co = means["normal"], means["downward_shift"], means["conservative"]
    trad = ("tau_b", "spearman_rho", "auroc", "aucpr")
    d_mpa_c = abs(co["mpa"] - nm["mpa"])
    return {
        "shift_keeps_mpa": abs(sh["mpa"] - nm["mpa"]) <= 0.05,
        "shift_lowers_wra": nm["wra"] - sh["wra"] >= 0.1,
        "conservative_lowers_mpa": nm["mpa"] - co["mpa"] >= 0.1,
        "conservative_keeps_wra": abs(co["wra"] - nm["wra"]) <= 0.05,
        "traditional_follow_wra": all(sh[m] < nm[m] for m in trad)
        and all(abs(co[m] - nm[m]) < d_mpa_c for m in trad),
    }


def mean_over_seeds(cfg: SimulationConfig, seeds: Sequence[int], **kwargs) -> dict[str, dict[str, float]]:
    runs = [run_scenarios(SimulationConfig(**{**cfg.as_dict(), "seed": s}), **kwargs).means for s in seeds]
    return {p: {m: float(np.mean([r[p][m] for r in runs])) for m in SCENARIO_METRICS} for p in PATTERNS}


# Consistency study ------------------------------------------------------------

def mean_metrics(world: World, pattern: str = "normal", *, population: bool = True) -> dict[str, float]:
    """Across-rater mean mpa/wra of one world against its trained reference."""
    labels = trained_labels(world, population=population)
    n1 = labels.sum(axis=0).astype(float)
    n0 = len(world.trained) - n1
    c1, c0 = rater_confusions(score_matrix(world, pattern), n1, n0, world.cfg.k_max)
    vals = metrics_from_counts(c1, c0, ("mpa", "wra"))
    return {k: float(_nanmean(v)) for k, v in vals.items()}


def consistency_study(
    cfg: SimulationConfig,
    sizes: Sequence[int] = (1000, 4000),
    replications: int = 50,
    truth_items: int = 200_000,
) -> dict[int, dict[str, float]]:
    """Median absolute error of mpa and wra at each sample size.

    The rater population is fixed by ``cfg.seed``; each replication draws a
    fresh severity sample. The target is the same population evaluated on
    ``truth_items`` items with population percentile thresholds.
    """
    truth = mean_metrics(generate_world(SimulationConfig(**{**cfg.as_dict(), "n_items": truth_items}), stream=("truth",)))
    out = {}
    for n in sizes:
        sized = SimulationConfig(**{**cfg.as_dict(), "n_items": n})
        errs = {"mpa": [], "wra": []}
        for rep in range(replications):
            est = mean_metrics(generate_world(sized, stream=("rep", n, rep)))
            for k in errs:
                errs[k].append(abs(est[k] - truth[k]))
        out[n] = {k: float(np.median(v)) for k, v in errs.items()}
    return out
