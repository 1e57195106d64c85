"""
Evaluation metrics for binary segmentation.

Pixel confusion counts, accuracy / Jaccard / Dice, min-max score
normalization, ROC curve, trapezoidal AUC and the equal error rate with
threshold recovery.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.metrics import auc as trapezoid_auc
from sklearn.metrics import roc_curve as sklearn_roc_curve

from ..data.models import (
    MetricsReport,
    RocCurve,
    ScoreScaler,
    as_label_mask,
    check_same_shape,
)
from ..utils.exceptions import ConfigurationError, ShapeError, UsageError

logger = logging.getLogger(__name__)

ROC_COLUMNS = ["threshold", "fpr", "tpr"]


@dataclass(frozen=True)
class Confusion:
    """Pixel counts of a binary prediction against ground truth."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def empty_positive_class(self) -> bool:
        """True when neither prediction nor ground truth has a positive pixel."""
        return self.tp + self.fp + self.fn == 0

    def __add__(self, other: 'Confusion') -> 'Confusion':
        return Confusion(self.tp + other.tp, self.tn + other.tn,
                         self.fp + other.fp, self.fn + other.fn)

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.tp, self.tn, self.fp, self.fn)


def confusion(pred_mask, gt) -> Confusion:
    """Count tp, tn, fp, fn over all pixels."""
    p = as_label_mask(pred_mask, name="pred_mask").astype(bool)
    g = as_label_mask(gt).astype(bool)
    check_same_shape(p, g)
    tp = int(np.count_nonzero(p & g))
    tn = int(np.count_nonzero(~p & ~g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    return Confusion(tp, tn, fp, fn)


def _as_confusion(counts) -> Confusion:
    if isinstance(counts, Confusion):
        return counts
    tp, tn, fp, fn = counts
    return Confusion(int(tp), int(tn), int(fp), int(fn))


def accuracy(counts) -> float:
    """(tp + tn) / N."""
    c = _as_confusion(counts)
    if c.total == 0:
        raise UsageError("accuracy of an empty pixel set is undefined")
    return (c.tp + c.tn) / c.total


def jaccard(counts) -> float:
    """tp / (tp + fp + fn); 1.0 when both masks have no positives."""
    c = _as_confusion(counts)
    denominator = c.tp + c.fp + c.fn
    if denominator == 0:
        return 1.0
    return c.tp / denominator


def dice_score(counts) -> float:
    """2 tp / (2 tp + fp + fn); 1.0 when both masks have no positives."""
    c = _as_confusion(counts)
    denominator = 2 * c.tp + c.fp + c.fn
    if denominator == 0:
        return 1.0
    return 2 * c.tp / denominator


def fit_scaler(scores: Iterable[float]) -> ScoreScaler:
    """Fit min-max normalization on calibration scores."""
    arr = np.asarray(list(scores) if not isinstance(scores, np.ndarray) else scores, dtype=np.float64).ravel()
    if arr.size < 2:
        raise ConfigurationError("score scaler needs at least two scores")
    lo, hi = float(arr.min()), float(arr.max())
    if not hi > lo:
        raise ConfigurationError(f"cannot fit score scaler on constant scores ({lo})")
    return ScoreScaler(lo, hi)


def apply_scaler(scaler: ScoreScaler, scores) -> np.ndarray:
    """(s - min) / (max - min) clipped to [0, 1]."""
    arr = np.asarray(scores, dtype=np.float64)
    scaled = (arr - scaler.min_score) / (scaler.max_score - scaler.min_score)
    return np.clip(scaled, 0.0, 1.0)


def _validated_scores(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores vs {y.size} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ConfigurationError("labels must be 0 or 1")
    if not np.all(np.isfinite(s)):
        raise ConfigurationError("scores must be finite")
    return s, y.astype(bool)


def has_both_classes(labels) -> bool:
    """True when the labels hold at least one positive and one negative."""
    y = np.asarray(labels).astype(bool)
    return bool(y.any() and not y.all())


def roc_curve(scores, labels) -> RocCurve:
    """ROC staircase over every distinct score.

    Thresholds run from a sentinel just above the maximum score down through
    every distinct score to a sentinel just below the minimum; a pixel is
    positive iff its score >= threshold. Consecutive thresholds producing
    the same (fpr, tpr) point are collapsed onto the highest one, so the
    curve always starts at (0, 0) and ends at (1, 1).

    Raises:
        UsageError: If the labels hold a single class
    """
    s, y = _validated_scores(scores, labels)
    if not has_both_classes(y):
        raise UsageError("ROC needs at least one positive and one negative label")

    fpr, tpr, thresholds = sklearn_roc_curve(y.astype(np.int8), s, drop_intermediate=False)
    # The leading (0, 0) point carries an unbounded threshold
    thresholds = np.r_[np.nextafter(s.max(), np.inf), thresholds[1:], np.nextafter(s.min(), -np.inf)]
    fpr = np.r_[fpr, 1.0].astype(np.float64)
    tpr = np.r_[tpr, 1.0].astype(np.float64)

    keep = np.ones(thresholds.size, dtype=bool)
    keep[1:] = (np.diff(tpr) != 0) | (np.diff(fpr) != 0)
    return RocCurve(thresholds=thresholds[keep], fpr=fpr[keep], tpr=tpr[keep])


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve."""
    return float(trapezoid_auc(curve.fpr, curve.tpr))


def eer(curve: RocCurve) -> Tuple[float, float]:
    """Equal error rate and its threshold.

    Finds the first curve point where fpr >= fnr (fnr = 1 - tpr) and
    interpolates linearly between it and its predecessor.
    """
    fnr = 1.0 - curve.tpr
    gap = curve.fpr - fnr
    crossing = int(np.argmax(gap >= 0.0))
    if gap[crossing] == 0.0 or crossing == 0:
        return float(curve.fpr[crossing]), float(curve.thresholds[crossing])

    lo, hi = crossing - 1, crossing
    w = -gap[lo] / (gap[hi] - gap[lo])
    rate = curve.fpr[lo] + w * (curve.fpr[hi] - curve.fpr[lo])
    threshold = curve.thresholds[lo] + w * (curve.thresholds[hi] - curve.thresholds[lo])
    return float(np.clip(rate, 0.0, 1.0)), float(threshold)


def write_roc_csv(curve: RocCurve, path: Union[str, Path]) -> Path:
    """Write an ROC curve as CSV with header threshold,fpr,tpr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"threshold": curve.thresholds, "fpr": curve.fpr, "tpr": curve.tpr},
                         columns=ROC_COLUMNS)
    frame.to_csv(path, index=False)
    return path


def build_report(scores, labels, threshold: float) -> MetricsReport:
    """Full report for normalized scores at a decision threshold.

    Counts and the accuracy / Jaccard / Dice ratios are always computed.
    ROC AUC and EER need both classes; for a single-class label set they are
    left as None and the report is flagged ``single_class``.

    Args:
        scores: Per-pixel scores in [0, 1]
        labels: Matching binary labels
        threshold: Decision threshold (positive iff score >= threshold)

    Returns:
        MetricsReport with counts, ratios, ROC AUC and EER
    """
    if not 0.0 <= threshold <= 1.0:
        raise ConfigurationError(f"threshold must lie in [0, 1], got {threshold}")
    s, y = _validated_scores(scores, labels)
    counts = confusion((s >= threshold)[np.newaxis, :], y[np.newaxis, :])
    if counts.empty_positive_class:
        logger.warning("No positive pixels in prediction or ground truth; Jaccard/Dice set to 1.0")

    roc_auc: Optional[float] = None
    eer_rate: Optional[float] = None
    eer_threshold: Optional[float] = None
    single_class = not has_both_classes(y)
    if single_class:
        logger.warning(f"Labels hold a single class ({int(y.sum())} of {y.size} positive); "
                       f"ROC AUC and EER are not defined")
    else:
        curve = roc_curve(s, y)
        roc_auc = auc(curve)
        eer_rate, eer_threshold = eer(curve)

    return MetricsReport(
        accuracy=accuracy(counts),
        jaccard=jaccard(counts),
        dice=dice_score(counts),
        roc_auc=roc_auc,
        eer=eer_rate,
        eer_threshold=eer_threshold,
        tp=counts.tp,
        tn=counts.tn,
        fp=counts.fp,
        fn=counts.fn,
        threshold=float(threshold),
        empty_positive_class=counts.empty_positive_class,
        single_class=single_class,
    )


__all__ = [
    "Confusion",
    "confusion",
    "accuracy",
    "jaccard",
    "dice_score",
    "fit_scaler",
    "apply_scaler",
    "has_both_classes",
    "roc_curve",
    "auc",
    "eer",
    "ROC_COLUMNS",
    "write_roc_csv",
    "build_report",
]
