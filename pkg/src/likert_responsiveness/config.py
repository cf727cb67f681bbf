"""Run configuration loaded from JSON.

Relative input paths resolve against the directory of the config file. A
minimal config::

    {
      "ratings": "ratings.csv",
      "binary": "binary.csv",
      "attributes": "attributes.csv",
      "k_max": 4,
      "groups": {"trisections": ["gender", "age", "education"]}
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .aggregation import AggregationPolicy
from .inference import ResampleConfig
from .ratings_model import GroupKey, InputError
from .reference import CROWD, GUIDELINE

REFERENCE_CHOICES = (GUIDELINE, CROWD, "both")
_KNOWN = {
    "ratings", "binary", "attributes", "items", "k_max", "groups", "reference", "aggregation",
    "resample", "filters", "breakdown", "compare", "compare_metrics", "collapse_majority",
    "min_support", "boundaries", "out", "simulation",
}


@dataclass(frozen=True)
class GroupSpec:
    """Explicit group keys, or every observed combination over ``trisection_axes``."""

    keys: tuple[GroupKey, ...] = ()
    trisection_axes: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.keys and not self.trisection_axes:
            raise ValueError("groups must be non-empty")


@dataclass(frozen=True)
class RunConfig:
    ratings: Path
    attributes: Path
    k_max: int
    groups: GroupSpec
    binary: Path | None = None
    items: Path | None = None
    reference: str = "both"
    aggregation: AggregationPolicy = AggregationPolicy()
    resample: ResampleConfig = ResampleConfig()
    filters: tuple[tuple[str, str], ...] = ()
    breakdown: str | None = None
    compare: tuple[tuple[str, str], ...] = ()
    compare_metrics: tuple[str, ...] = ("hm",)
    collapse_majority: bool = False
    min_support: int = 1
    boundaries: tuple[int, ...] | None = None
    out: Path = Path("out")
    simulation: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.reference not in REFERENCE_CHOICES:
            raise ValueError(f"reference must be one of {REFERENCE_CHOICES}")
        if self.reference in (GUIDELINE, "both") and self.binary is None:
            raise ValueError("a guideline reference needs a binary labels file")
        if (self.filters or self.breakdown) and self.items is None:
            raise ValueError("item filters and breakdowns need an items file")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")
        if self.boundaries is not None and not all(1 <= t <= self.k_max for t in self.boundaries):
            raise ValueError(f"boundaries must lie in 1..{self.k_max}")

    @property
    def reference_kinds(self) -> tuple[str, ...]:
        return (GUIDELINE, CROWD) if self.reference == "both" else (self.reference,)

    @property
    def input_paths(self) -> dict[str, Path]:
        paths = {"ratings": self.ratings, "attributes": self.attributes, "binary": self.binary, "items": self.items}
        return {k: v for k, v in paths.items() if v is not None}

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(
            self,
            aggregation=replace(self.aggregation, seed=seed),
            resample=replace(self.resample, seed=seed),
            simulation={**self.simulation, "seed": seed},
        )

    def settings(self) -> dict:
        """Everything that affects results, with inputs identified by content."""
        return {
            "inputs": {k: _file_digest(p) for k, p in sorted(self.input_paths.items())},
            "k_max": self.k_max,
            "groups": {
                "keys": [k.label for k in self.groups.keys],
                "trisections": list(self.groups.trisection_axes),
            },
            "reference": self.reference,
            "aggregation": {"kind": self.aggregation.kind, "seed": self.aggregation.seed},
            "resample": {
                "bootstrap_trials": self.resample.bootstrap_trials,
                "permutations": self.resample.permutations,
                "alpha": self.resample.alpha,
                "seed": self.resample.seed,
            },
            "filters": [list(f) for f in self.filters],
            "breakdown": self.breakdown,
            "compare": [list(c) for c in self.compare],
            "compare_metrics": list(self.compare_metrics),
            "collapse_majority": self.collapse_majority,
            "min_support": self.min_support,
            "boundaries": None if self.boundaries is None else list(self.boundaries),
        }

    def config_hash(self) -> str:
        text = json.dumps(self.settings(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _file_digest(path: Path) -> str:
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError:
        return ""


def _groups(raw) -> GroupSpec:
    if isinstance(raw, Mapping):
        axes = raw.get("trisections")
        if not axes:
            raise ValueError('groups object must have a non-empty "trisections" list')
        extra = tuple(GroupKey.parse(g) for g in raw.get("keys", []))
        return GroupSpec(extra, tuple(axes))
    if isinstance(raw, str):
        raw = [raw]
    if not raw:
        raise ValueError("groups must be non-empty")
    return GroupSpec(tuple(GroupKey.parse(g) for g in raw))


def run_config_from_mapping(data: Mapping[str, Any], base: Path = Path(".")) -> RunConfig:
    unknown = sorted(set(data) - _KNOWN)
    if unknown:
        raise ValueError(f"unknown config key(s): {unknown}")
    for key in ("ratings", "attributes", "k_max", "groups"):
        if key not in data:
            raise ValueError(f"config is missing {key!r}")

    def path(key):
        return None if data.get(key) is None else (base / data[key])

    filters = data.get("filters", {})
    compare = data.get("compare", [])
    if any(len(c) != 2 for c in compare):
        raise ValueError("each compare entry must be a [group_a, group_b] pair")
    return RunConfig(
        ratings=path("ratings"),
        attributes=path("attributes"),
        binary=path("binary"),
        items=path("items"),
        k_max=int(data["k_max"]),
        groups=_groups(data["groups"]),
        reference=data.get("reference", "both"),
        aggregation=AggregationPolicy(**data.get("aggregation", {})),
        resample=ResampleConfig(**data.get("resample", {})),
        filters=tuple(sorted((str(k), str(v)) for k, v in filters.items())),
        breakdown=data.get("breakdown"),
        compare=tuple((GroupKey.parse(a).label, GroupKey.parse(b).label) for a, b in compare),
        compare_metrics=tuple(data.get("compare_metrics", ["hm"])),
        collapse_majority=bool(data.get("collapse_majority", False)),
        min_support=int(data.get("min_support", 1)),
        boundaries=None if data.get("boundaries") is None else tuple(int(t) for t in data["boundaries"]),
        out=base / data.get("out", "out"),
        simulation=dict(data.get("simulation", {})),
    )


def load_run_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise InputError("config file not found", path=str(path))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON: {exc.msg}", path=str(path), line=exc.lineno) from None
    try:
        return run_config_from_mapping(data, path.parent)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc), path=str(path)) from None
