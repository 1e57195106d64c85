"""
Data models for homotopy-seg.

This module contains the data structures shared across the library:
array validators for probability maps, label masks and image patches,
and the configuration / result dataclasses.
"""

import math
from dataclasses import dataclass, asdict, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from ..utils.config import Config
from ..utils.exceptions import ConfigurationError, ShapeError

ProbMap = NDArray[np.float64]
LabelMask = NDArray[np.uint8]
ImagePatch = NDArray[np.float64]

T_GRANULARITIES = ("step", "epoch")
TRAIN_MODES = ("multi_objective", "single_objective")


def as_prob_map(values: Any, name: str = "pred") -> ProbMap:
    """Validate and convert a per-pixel probability map.

    Args:
        values: 2-D array-like of probabilities
        name: Name used in error messages

    Returns:
        float64 array of shape (height, width)
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D map, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ConfigurationError(f"{name} values must lie in [0, 1]")
    return arr


def as_label_mask(values: Any, name: str = "gt") -> LabelMask:
    """Validate and convert a binary ground-truth mask."""
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-D mask, got shape {arr.shape}")
    if arr.dtype == np.bool_:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ConfigurationError(f"{name} values must be exactly 0 or 1")
    return arr.astype(np.uint8)


def as_image_patch(values: Any, channels: int = 3, name: str = "patch") -> ImagePatch:
    """Validate an (height, width, channels) image with values in [0, 1]."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must have shape (height, width, channels), got {arr.shape}")
    if arr.shape[2] != channels:
        raise ShapeError(f"{name} has {arr.shape[2]} channels, expected {channels}")
    return arr


def check_same_shape(pred: np.ndarray, gt: np.ndarray) -> None:
    """Raise ShapeError unless two maps have identical dimensions."""
    if pred.shape != gt.shape:
        raise ShapeError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")


def parse_size(text: str) -> Tuple[int, int]:
    """Parse a "HxW" size string such as "8x8" or "1120x1120"."""
    parts = str(text).lower().split("x")
    try:
        height, width = (int(p) for p in parts)
    except ValueError:
        raise ConfigurationError(f"size must look like HxW, got {text!r}") from None
    if height < 1 or width < 1:
        raise ConfigurationError(f"size must be positive, got {text!r}")
    return height, width


def _optional_float(value: Optional[float]) -> Optional[float]:
    return None if value is None else float(value)


@dataclass(frozen=True)
class LossConfig:
    """Weights of the DiceCE and smoothness objectives."""

    beta: float = 0.5
    lambda_smooth: float = 1.0
    epsilon: float = 1e-6
    clamp: float = 1e-7
    normalize_smooth: bool = False

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"beta must lie in [0, 1], got {self.beta}")
        if not self.lambda_smooth >= 0.0:
            raise ConfigurationError(f"lambda_smooth must be >= 0, got {self.lambda_smooth}")
        if not self.epsilon > 0.0:
            raise ConfigurationError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0.0 < self.clamp < 0.5:
            raise ConfigurationError(f"clamp must lie in (0, 0.5), got {self.clamp}")

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a plain dictionary."""
        return asdict(self)

    @classmethod
    def from_config(cls, config: Config) -> 'LossConfig':
        """Build from the `loss` section of a Config."""
        return cls(
            beta=float(config.get('loss.beta', 0.5)),
            lambda_smooth=float(config.get('loss.lambda_smooth', 1.0)),
            epsilon=float(config.get('loss.epsilon', 1e-6)),
            clamp=float(config.get('loss.clamp', 1e-7)),
            normalize_smooth=bool(config.get('loss.normalize_smooth', False)),
        )


@dataclass(frozen=True)
class TrainConfig:
    """Settings of one homotopy training run."""

    epochs: int = 100
    batch_size: int = 8
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    alpha_start: float = 1e-5
    alpha_end: float = 1e-5
    t_granularity: str = "step"
    t_max: float = 1.0
    mode: str = "multi_objective"
    augment: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not (self.alpha_start > 0.0 and self.alpha_end > 0.0):
            raise ConfigurationError("alpha_start and alpha_end must be > 0")
        if self.t_granularity not in T_GRANULARITIES:
            raise ConfigurationError(f"t_granularity must be one of {T_GRANULARITIES}")
        # t_max = 0 pins a multi-objective run to t = 0
        if not 0.0 <= self.t_max <= 1.0:
            raise ConfigurationError(f"t_max must lie in [0, 1], got {self.t_max}")
        if self.mode not in TRAIN_MODES:
            raise ConfigurationError(f"mode must be one of {TRAIN_MODES}")

    @property
    def single_objective(self) -> bool:
        return self.mode == "single_objective"

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a plain dictionary."""
        return asdict(self)

    @classmethod
    def from_config(cls, config: Config) -> 'TrainConfig':
        """Build from the `train` and `loss` sections of a Config."""
        return cls(
            epochs=int(config.get('train.epochs', 100)),
            batch_size=int(config.get('train.batch_size', 8)),
            seed=int(config.get('train.seed', 0)),
            loss=LossConfig.from_config(config),
            alpha_start=float(config.get('train.alpha_start', 1e-5)),
            alpha_end=float(config.get('train.alpha_end', 1e-5)),
            t_granularity=str(config.get('train.t_granularity', "step")),
            t_max=float(config.get('train.t_max', 1.0)),
            mode=str(config.get('train.mode', "multi_objective")),
            augment=bool(config.get("train.augment", True)),
        )


@dataclass(frozen=True)
class GradcheckConfig:
    """Settings of the finite-difference gradient verification."""

    instances: int = 100
    sizes: Tuple[Tuple[int, int], ...] = ((4, 4), (8, 8))
    loss_step: float = 1e-5
    model_step: float = 1e-4
    loss_rtol: float = 1e-4
    model_rtol: float = 1e-3
    seed: int = 0
    c_hidden: int = 8

    def __post_init__(self):
        if self.instances < 1:
            raise ConfigurationError(f"instances must be >= 1, got {self.instances}")
        if not self.sizes:
            raise ConfigurationError("at least one instance size is required")
        if not (self.loss_step > 0.0 and self.model_step > 0.0):
            raise ConfigurationError("finite-difference steps must be > 0")
        if not (self.loss_rtol > 0.0 and self.model_rtol > 0.0):
            raise ConfigurationError("tolerances must be > 0")

    @classmethod
    def from_config(cls, config: Config) -> 'GradcheckConfig':
        """Build from the `gradcheck` section of a Config."""
        return cls(
            instances=int(config.get('gradcheck.instances', 100)),
            sizes=tuple(parse_size(s) for s in config.get('gradcheck.sizes', ["4x4", "8x8"])),
            loss_step=float(config.get('gradcheck.loss_step', 1e-5)),
            model_step=float(config.get('gradcheck.model_step', 1e-4)),
            loss_rtol=float(config.get('gradcheck.loss_rtol', 1e-4)),
            model_rtol=float(config.get('gradcheck.model_rtol', 1e-3)),
            seed=int(config.get('gradcheck.seed', 0)),
            c_hidden=int(config.get('model.c_hidden', 8)),
        )


@dataclass
class Patch:
    """An image patch with its label mask and provenance."""

    image: ImagePatch
    mask: LabelMask
    name: str = ""
    row: int = 0
    col: int = 0

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.mask.shape[0]), int(self.mask.shape[1]))


@dataclass
class HistoryRecord:
    """Loss components of one training step."""

    step: int
    epoch: int
    t: float
    alpha: float
    dicece: float
    smooth: float
    combined: float


HISTORY_COLUMNS = ["step", "epoch", "t", "alpha", "dicece", "smooth", "combined"]


@dataclass
class TrainHistory:
    """Per-step records plus per-epoch timing of a training run."""

    records: List[HistoryRecord] = field(default_factory=list)
    epoch_seconds: List[float] = field(default_factory=list)
    final_t: float = 0.0
    final_alpha: float = 0.0

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> List[float]:
        """Values of one history column in step order."""
        return [getattr(record, name) for record in self.records]

    def to_rows(self) -> List[Dict[str, Any]]:
        return [asdict(record) for record in self.records]


@dataclass
class MetricsReport:
    """Evaluation metrics in report column order plus raw pixel counts.

    ROC AUC, EER and the EER threshold are None when the evaluated labels
    hold a single class (``single_class``).
    """

    accuracy: float
    jaccard: float
    dice: float
    roc_auc: Optional[float]
    eer: Optional[float]
    eer_threshold: Optional[float]
    tp: int
    tn: int
    fp: int
    fn: int
    threshold: float = 0.5
    empty_positive_class: bool = False
    single_class: bool = False

    TABLE_FIELDS = ("accuracy", "jaccard", "dice", "roc_auc", "eer", "eer_threshold")

    def table_values(self) -> List[Optional[float]]:
        return [getattr(self, name) for name in self.TABLE_FIELDS]

    def to_dict(self) -> Dict[str, Any]:
        """Convert report to dictionary for storage."""
        return {
            "accuracy": float(self.accuracy),
            "jaccard": float(self.jaccard),
            "dice": float(self.dice),
            "roc_auc": _optional_float(self.roc_auc),
            "eer": _optional_float(self.eer),
            "eer_threshold": _optional_float(self.eer_threshold),
            "tp": int(self.tp),
            "tn": int(self.tn),
            "fp": int(self.fp),
            "fn": int(self.fn),
            "threshold": float(self.threshold),
            "empty_positive_class": bool(self.empty_positive_class),
            "single_class": bool(self.single_class),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MetricsReport':
        """Create report from dictionary, ignoring unknown keys."""
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic aerial scene."""

    width: int = 5280
    height: int = 3956
    grass_fraction: float = 0.5
    texture_seed: int = 0
    fence_lines: int = 0
    elevation_m: float = 10.0

    MIN_SIZE = 16

    def __post_init__(self):
        if not 0.0 < self.grass_fraction <= 1.0:
            raise ConfigurationError(f"grass_fraction must lie in (0, 1], got {self.grass_fraction}")
        if self.fence_lines < 0:
            raise ConfigurationError("fence_lines must be >= 0")
        if not (self.elevation_m > 0.0 and math.isfinite(self.elevation_m)):
            raise ConfigurationError(f"elevation_m must be > 0, got {self.elevation_m}")


@dataclass(frozen=True)
class BrushSpec:
    """Circle brush used by the simulated annotator."""

    diameter_px: int = 64
    shape: str = "disk"

    def __post_init__(self):
        if self.diameter_px < 1:
            raise ConfigurationError(f"brush diameter must be >= 1, got {self.diameter_px}")
        if self.shape != "disk":
            raise ConfigurationError(f"unsupported brush shape {self.shape!r}")


@dataclass(frozen=True)
class AnnotationFootprint:
    """Ground footprint of one brush dab."""

    area_cm2: float
    extent_cm: float


@dataclass
class RocCurve:
    """ROC points ordered by decreasing threshold."""

    thresholds: NDArray[np.float64]
    fpr: NDArray[np.float64]
    tpr: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.thresholds.shape[0])

    def points(self) -> List[Tuple[float, float, float]]:
        return [(float(a), float(b), float(c)) for a, b, c in zip(self.thresholds, self.fpr, self.tpr)]


@dataclass(frozen=True)
class ScoreScaler:
    """Min-max score normalization fitted on calibration scores."""

    min_score: float
    max_score: float

    def to_dict(self) -> Dict[str, float]:
        return {"min_score": float(self.min_score), "max_score": float(self.max_score)}


@dataclass(frozen=True)
class AugmentParams:
    """One draw of the geometric and photometric augmentation."""

    rotations: int = 0
    flip_horizontal: bool = False
    flip_vertical: bool = False
    jitter: Tuple[float, float, float] = (1.0, 1.0, 1.0)

    @property
    def is_identity(self) -> bool:
        return (self.rotations % 4 == 0 and not self.flip_horizontal
                and not self.flip_vertical and all(j == 1.0 for j in self.jitter))


__all__ = [
    "ProbMap",
    "LabelMask",
    "ImagePatch",
    "as_prob_map",
    "as_label_mask",
    "as_image_patch",
    "check_same_shape",
    "parse_size",
    "LossConfig",
    "TrainConfig",
    "GradcheckConfig",
    "Patch",
    "HistoryRecord",
    "HISTORY_COLUMNS",
    "TrainHistory",
    "MetricsReport",
    "SceneSpec",
    "BrushSpec",
    "AnnotationFootprint",
    "RocCurve",
    "ScoreScaler",
    "AugmentParams",
]
