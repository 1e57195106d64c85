"""
Data models and synthetic data for homotopy-seg.

This package contains the shared dataclasses, the synthetic scene and
brush-annotation pipeline, and corpus storage.
"""

from .models import (
    LossConfig,
    TrainConfig,
    GradcheckConfig,
    Patch,
    TrainHistory,
    MetricsReport,
    SceneSpec,
    BrushSpec,
)
from .corpus import write_corpus, load_patches

__all__ = [
    "LossConfig",
    "TrainConfig",
    "GradcheckConfig",
    "Patch",
    "TrainHistory",
    "MetricsReport",
    "SceneSpec",
    "BrushSpec",
    "write_corpus",
    "load_patches",
]
