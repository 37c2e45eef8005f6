"""Typed data for MMAP-BIRL: numeric containers, configuration and result records."""

from .config import (
    AscentConfig,
    EmConfig,
    ExperimentConfig,
    Method,
    OcclusionMode,
    OcclusionSpec,
    SegmentStart,
    SweepConfig,
)
from .domain import (
    DiscountedMdp,
    FeatureMap,
    GaussianPrior,
    ObservationModel,
    ObservedTrajectory,
    GroundTruthTrajectory,
    PosteriorMarginals,
    OptimalityRegion,
    GradientCacheEntry,
)
from .records import AscentResult, ConfusionCounts, EmResult, IterationRecord, SweepRow

__all__ = [
    "AscentConfig",
    "EmConfig",
    "ExperimentConfig",
    "Method",
    "OcclusionMode",
    "OcclusionSpec",
    "SegmentStart",
    "SweepConfig",
    "DiscountedMdp",
    "FeatureMap",
    "GaussianPrior",
    "ObservationModel",
    "ObservedTrajectory",
    "GroundTruthTrajectory",
    "PosteriorMarginals",
    "OptimalityRegion",
    "GradientCacheEntry",
    "AscentResult",
    "ConfusionCounts",
    "EmResult",
    "IterationRecord",
    "SweepRow",
]
