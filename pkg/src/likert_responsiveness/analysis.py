"""Orchestration of group x reference x tag analyses for the CLI."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import __version__
from .aggregation import GroupScoreTable, aggregate
from .baselines import evaluate_baselines, macro_baselines, mokken_h
from .config import RunConfig
from .inference import bootstrap_cis, permutation_test
from .pipeline import METRICS, GroupStatistic, macro, metrics_from_counts
from .ratings_model import (
    BinaryRecord,
    GroupKey,
    ItemMeta,
    RaterAttributes,
    RatingTable,
    LikertScale,
    load_attributes,
    load_binary,
    load_items,
    load_ratings,
    select_raters,
    trisection_keys,
)
from .reference import CROWD, GUIDELINE, Boundary, LabelCounts, all_boundaries, crowd_pairs_all, guideline_pairs, rest_scores
from .report import SCHEMA_VERSION
from .responsiveness import confusion, evaluate_unit

INTERVAL_METRICS = ("mpa", "wra", "hm", "tau_b", "auroc")


@dataclass(frozen=True, eq=False)
class Inputs:
    table: RatingTable
    binary: list[BinaryRecord] | None
    attributes: list[RaterAttributes]
    items: list[ItemMeta] | None

    @cached_property
    def labels(self) -> LabelCounts | None:
        return None if self.binary is None else LabelCounts.from_records(self.binary)


def load_inputs(cfg: RunConfig) -> Inputs:
    table = load_ratings(cfg.ratings, LikertScale(cfg.k_max))
    binary = load_binary(cfg.binary) if cfg.binary is not None else None
    attrs = load_attributes(cfg.attributes)
    items = load_items(cfg.items) if cfg.items is not None else None
    if cfg.filters:
        keep = {m.item_id for m in items if all(m.tags.get(k) == v for k, v in cfg.filters)}
        table = table.subset_items(keep)
        if binary is not None:
            binary = [b for b in binary if b.item_id in keep]
    return Inputs(table, binary, attrs, items)


def resolve_groups(cfg: RunConfig, attrs: Sequence[RaterAttributes]) -> list[GroupKey]:
    keys = list(cfg.groups.keys)
    if cfg.groups.trisection_axes:
        keys += [k for k in trisection_keys(attrs, cfg.groups.trisection_axes) if k not in keys]
    return keys


def group_raters(inputs: Inputs, key: GroupKey) -> list[str]:
    """Group members that contributed at least one rating, sorted."""
    members = select_raters(inputs.attributes, key)
    return sorted(members & set(inputs.table.rater_ids))


def boundaries_for(cfg: RunConfig) -> list[Boundary]:
    if cfg.boundaries is None:
        return all_boundaries(LikertScale(cfg.k_max))
    return [Boundary(t) for t in cfg.boundaries]


def _tag_slices(cfg: RunConfig, inputs: Inputs) -> list[tuple[dict | None, RatingTable]]:
    slices: list[tuple[dict | None, RatingTable]] = [(None, inputs.table)]
    if cfg.breakdown:
        values = sorted({m.tags[cfg.breakdown] for m in inputs.items if cfg.breakdown in m.tags})
        for v in values:
            keep = {m.item_id for m in inputs.items if m.tags.get(cfg.breakdown) == v}
            slices.append(({"name": cfg.breakdown, "value": v}, inputs.table.subset_items(keep)))
    return slices


def bundle(sets) -> dict[str, float]:
    """All metrics of a list of pair sets, macro-averaged over boundaries."""
    try:
        per = []
        for p in sets:
            c = confusion(p)
            per.append(metrics_from_counts(c.n1, c.n0, METRICS))
    except ValueError:
        return {m: math.nan for m in METRICS}
    return {k: float(v) for k, v in macro(per).items()}


def _with_min_support(scores: GroupScoreTable, min_support: int) -> GroupScoreTable:
    if min_support <= 1:
        return scores
    keep = scores.support >= min_support
    return GroupScoreTable(
        scores.scale, tuple(i for i, k in zip(scores.item_ids, keep) if k), scores.scores[keep], scores.support[keep],
    )


def _empty_row(key: GroupKey, kind: str, tag, n_raters: int, note: str) -> dict:
    return {
        "group": key.label,
        "reference_kind": kind,
        "tag": tag,
        "defined": False,
        "n_raters": n_raters,
        "n_items": 0,
        "pair_count": 0,
        "metrics": {"mpa": None, "wra": None, "hm": None},
        "per_boundary": [],
        "baselines": {},
        "intervals": {},
        "note": note,
    }


def analyze_row(
    cfg: RunConfig,
    inputs: Inputs,
    key: GroupKey,
    kind: str,
    tag,
    table: RatingTable,
) -> dict:
    raters = group_raters(inputs, key)
    if not raters:
        return _empty_row(key, kind, tag, 0, "group has no raters")
    try:
        scores = aggregate(table, raters, cfg.aggregation)
    except ValueError as exc:
        return _empty_row(key, kind, tag, len(raters), str(exc))
    scores = _with_min_support(scores, cfg.min_support)
    try:
        if not len(scores):
            raise ValueError("group scored no items")
        if kind == GUIDELINE:
            sets = [guideline_pairs(scores, inputs.labels, unit=key.label, collapse=cfg.collapse_majority)]
        else:
            sets = crowd_pairs_all(
                table, raters, scores, boundaries_for(cfg), unit=key.label, collapse=cfg.collapse_majority,
            )
        resp = evaluate_unit(sets)
    except ValueError as exc:
        return _empty_row(key, kind, tag, len(raters), str(exc))

    base = macro_baselines([evaluate_baselines(p) for p in sets])
    base_dict = base.as_dict()
    if kind == CROWD:
        h = mokken_h(scores, rest_scores(table, raters, scores.item_ids))
        base_dict["mokken_h"] = None if math.isnan(h) else h
    else:
        base_dict["mokken_h"] = None

    cis = bootstrap_cis(lambda s: {m: bundle(s)[m] for m in INTERVAL_METRICS}, sets, cfg.resample)
    intervals = {
        m: {"lo": r.lo, "hi": r.hi, "trials": r.trials, "note": r.diagnostic}
        for m, r in cis.items()
    }
    return {
        "group": key.label,
        "reference_kind": kind,
        "tag": tag,
        "defined": True,
        "n_raters": len(raters),
        "n_items": len(scores),
        "pair_count": resp.pair_count,
        "metrics": {"mpa": resp.mpa, "wra": resp.wra, "hm": resp.hm},
        "per_boundary": [
            {"boundary": b.boundary, "mpa": b.mpa, "wra": b.wra, "hm": b.hm, "pair_count": b.pair_count}
            for b in resp.per_boundary
        ],
        "baselines": base_dict,
        "intervals": intervals,
        "note": "",
    }


def compare_groups(
    cfg: RunConfig,
    inputs: Inputs,
    key_a: GroupKey,
    key_b: GroupKey,
    kind: str,
    metric: str,
    table: RatingTable | None = None,
    n_tests: int = 1,
) -> dict:
    table = inputs.table if table is None else table
    a, b = group_raters(inputs, key_a), group_raters(inputs, key_b)
    entry = {"group_a": key_a.label, "group_b": key_b.label, "reference_kind": kind, "metric": metric}
    if not a or not b or set(a) & set(b):
        note = "groups overlap" if set(a) & set(b) else "empty group"
        return {**entry, "observed_diff": None, "p_value": None, "permutations": cfg.resample.permutations,
                "significant": None, "note": note}
    stat = GroupStatistic(
        table, reference=kind, labels=inputs.labels, boundaries=boundaries_for(cfg),
        policy=cfg.aggregation, metric=metric, collapse=cfg.collapse_majority,
    )
    res = permutation_test(stat, a, b, cfg.resample)
    defined = not math.isnan(res.p_value)
    return {
        **entry,
        "observed_diff": res.observed_diff,
        "p_value": res.p_value,
        "permutations": res.permutations,
        "significant": res.significant(cfg.resample.alpha, n_tests) if defined else None,
        "note": "" if defined else "statistic undefined",
    }


def metadata(cfg: RunConfig) -> dict:
    return {
        "tool_version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.resample.seed,
        "aggregation": {"kind": cfg.aggregation.kind, "seed": cfg.aggregation.seed},
        "k_max": cfg.k_max,
        "bootstrap_trials": cfg.resample.bootstrap_trials,
        "permutations": cfg.resample.permutations,
        "alpha": cfg.resample.alpha,
    }


def run_metrics(cfg: RunConfig, inputs: Inputs, *, workers: int = 1) -> tuple[dict, list[str]]:
    """Build the full report; returns it with the list of analysis warnings."""
    keys = resolve_groups(cfg, inputs.attributes)
    slices = _tag_slices(cfg, inputs)
    jobs = [(key, kind, tag, table) for key in keys for kind in cfg.reference_kinds for tag, table in slices]

    def run(job):
        return analyze_row(cfg, inputs, *job)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(run, jobs))
    else:
        rows = [run(j) for j in jobs]

    comparisons = []
    n_tests = max(1, len(cfg.compare) * len(cfg.compare_metrics))
    for kind in cfg.reference_kinds:
        for a, b in cfg.compare:
            for metric in cfg.compare_metrics:
                comparisons.append(compare_groups(
                    cfg, inputs, GroupKey.parse(a), GroupKey.parse(b), kind, metric, n_tests=n_tests,
                ))
    warnings = [f"{r['group']} / {r['reference_kind']}{_tag_text(r['tag'])}: {r['note']}" for r in rows if not r["defined"]]
    warnings += [f"compare {c['group_a']} vs {c['group_b']}: {c['note']}" for c in comparisons if c["note"]]
    report = {
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata(cfg),
        "rows": rows,
        "comparisons": comparisons,
        "warnings": warnings,
    }
    return report, warnings


def _tag_text(tag) -> str:
    return "" if tag is None else f" [{tag['name']}={tag['value']}]"


def validate(cfg: RunConfig, inputs: Inputs) -> tuple[dict, list[str]]:
    table = inputs.table
    warnings = []
    groups = []
    keys = resolve_groups(cfg, inputs.attributes)
    label_items = set(inputs.labels.item_ids) if inputs.binary is not None else set()
    for key in keys:
        try:
            raters = group_raters(inputs, key)
        except KeyError as exc:
            warnings.append(f"group {key.label}: {exc.args[0]}")
            groups.append({"group": key.label, "n_raters": 0, "items_rated": 0, "ratings": 0})
            continue
        mask = table.rater_mask(raters)[table.rater_idx]
        rated = {table.item_ids[i] for i in np.unique(table.item_idx[mask])}
        entry = {
            "group": key.label,
            "n_raters": len(raters),
            "items_rated": len(rated),
            "ratings": int(mask.sum()),
            "guideline_items": len(rated & label_items) if inputs.binary is not None else None,
            "crowd_reference_raters": len(table.rater_ids) - len(raters),
        }
        if not raters:
            warnings.append(f"group {key.label} has 0 raters")
        groups.append(entry)
    if inputs.binary is not None and not inputs.binary:
        warnings.append("binary labels file has no rows")
    unattributed = sorted(set(table.rater_ids) - {a.rater_id for a in inputs.attributes})
    if unattributed:
        warnings.append(f"{len(unattributed)} rater(s) without attributes")
    diag = {
        "schema_version": SCHEMA_VERSION,
        "scale": {"k_max": cfg.k_max, "conforms": True},
        "summary": table.summary(),
        "groups": groups,
        "references": {
            "guideline": {"items": len(label_items), "labels": len(inputs.binary or [])} if inputs.binary is not None else None,
            "crowd": {"raters": len(table.rater_ids)},
        },
        "warnings": warnings,
    }
    return diag, warnings


def select_top_raters(
    cfg: RunConfig, inputs: Inputs, n: int, *, reference: str = CROWD, workers: int = 1,
) -> tuple[dict, list[str]]:
    """Rank raters within each group by their own hm; report the top ``n``."""
    warnings = []
    out_groups = []
    for key in resolve_groups(cfg, inputs.attributes):
        raters = group_raters(inputs, key)
        if not raters:
            warnings.append(f"group {key.label} has 0 raters; skipped")
            continue

        def score(r):
            try:
                s = aggregate(inputs.table, [r], cfg.aggregation)
                if reference == GUIDELINE:
                    sets = [guideline_pairs(s, inputs.labels, unit=r)]
                else:
                    sets = crowd_pairs_all(inputs.table, [r], s, boundaries_for(cfg), unit=r)
                res = evaluate_unit(sets)
                return {"rater_id": r, "mpa": res.mpa, "wra": res.wra, "hm": res.hm, "pair_count": res.pair_count}
            except ValueError as exc:
                return {"rater_id": r, "mpa": None, "wra": None, "hm": None, "pair_count": 0, "note": str(exc)}

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                scored = list(pool.map(score, raters))
        else:
            scored = [score(r) for r in raters]
        ranked = sorted(
            (s for s in scored if s["hm"] is not None), key=lambda s: (-s["hm"], s["rater_id"]),
        )
        chosen = ranked[:n]
        if chosen and len(ranked) > n:
            cutoff = chosen[-1]["hm"]
            chosen += [s for s in ranked[n:] if abs(s["hm"] - cutoff) <= 1e-12]
        hms = [s["hm"] for s in ranked]
        entries = []
        for rank, s in enumerate(chosen, start=1):
            tie = sum(abs(h - s["hm"]) <= 1e-12 for h in hms) > 1
            entries.append({
                "rank": rank, "rater_id": s["rater_id"], "mpa": s["mpa"], "wra": s["wra"], "hm": s["hm"],
                "pair_count": s["pair_count"], "tie": tie,
            })
        shortfall = len(raters) < n
        if shortfall:
            warnings.append(f"group {key.label} has {len(raters)} rater(s), fewer than {n}")
        out_groups.append({
            "group": key.label,
            "n_requested": n,
            "n_raters": len(raters),
            "shortfall": shortfall,
            "undefined_raters": sorted(s["rater_id"] for s in scored if s["hm"] is None),
            "selected": entries,
        })
    report = {
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata(cfg),
        "reference_kind": reference,
        "groups": out_groups,
        "warnings": warnings,
    }
    return report, warnings


def group_curves(cfg: RunConfig, inputs: Inputs, key: GroupKey, kind: str):
    """Curves for one group: ``{boundary or None: {kind: CurvePoints}}``."""
    raters = group_raters(inputs, key)
    if not raters:
        raise ValueError(f"group {key.label} has no raters")
    scores = aggregate(inputs.table, raters, cfg.aggregation)
    if kind == GUIDELINE:
        res = evaluate_unit([guideline_pairs(scores, inputs.labels, unit=key.label)])
        return {None: res.curves}
    sets = crowd_pairs_all(inputs.table, raters, scores, boundaries_for(cfg), unit=key.label)
    return {b.boundary: b.curves for b in evaluate_unit(sets).per_boundary}

