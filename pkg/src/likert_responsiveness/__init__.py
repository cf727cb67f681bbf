"""Responsiveness metrics for ordinal ratings against a binary severity reference."""

from __future__ import annotations

from .aggregation import AggregationPolicy, GroupScoreTable, aggregate
from .baselines import BaselineResult, evaluate_baselines
from .inference import ResampleConfig, bootstrap_ci, permutation_test
from .ratings_model import GroupKey, InputError, LikertScale, RatingTable, load_binary, load_ratings
from .reference import Boundary, ReferencePairSet, crowd_pairs, guideline_pairs
from .responsiveness import ScoreConfusion, confusion, evaluate_unit, harmonic_mean

__version__ = "0.1.0"

__all__ = [
    "AggregationPolicy", "BaselineResult", "Boundary", "GroupKey", "GroupScoreTable", "InputError",
    "LikertScale", "RatingTable", "ReferencePairSet", "ResampleConfig", "ScoreConfusion", "aggregate",
    "bootstrap_ci", "confusion", "crowd_pairs", "evaluate_baselines", "evaluate_unit", "guideline_pairs",
    "harmonic_mean", "load_binary", "load_ratings", "permutation_test", "__version__",
]
