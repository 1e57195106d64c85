"""
Loss functions for homotopy training.

Dice, cross-entropy, their DiceCE blend, the anisotropic total-variation
smoothness penalty and the homotopy blend of DiceCE and smoothness, each
with an analytic gradient with respect to the prediction map.

All functions are pure and operate on 2-D float64 probability maps and
{0,1} label masks of identical shape.
"""

import logging
from typing import Tuple

import numpy as np

from ..data.models import (
    LossConfig,
    LabelMask,
    ProbMap,
    as_label_mask,
    as_prob_map,
    check_same_shape,
)
from ..utils.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


def _validated_pair(pred, gt) -> Tuple[ProbMap, LabelMask]:
    p = as_prob_map(pred)
    g = as_label_mask(gt)
    check_same_shape(p, g)
    return p, g


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ConfigurationError(f"homotopy parameter t must lie in [0, 1], got {t}")
    return t


def adjacent_pair_count(shape: Tuple[int, int]) -> int:
    """Number of vertical plus horizontal 4-neighbour pairs in a map."""
    n, m = shape
    return (n - 1) * m + n * (m - 1)


def dice_loss(pred, gt, epsilon: float = 1e-6) -> float:
    """Soft Dice loss 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps).

    Args:
        pred: Probability map
        gt: Binary label mask with the same shape
        epsilon: Positive smoothing constant

    Returns:
        Scalar loss
    """
    if not epsilon > 0.0:
        raise ConfigurationError(f"epsilon must be > 0, got {epsilon}")
    p, g = _validated_pair(pred, gt)
    intersection = float(np.sum(p * g))
    total = float(np.sum(p)) + float(np.sum(g))
    return 1.0 - (2.0 * intersection + epsilon) / (total + epsilon)


def ce_loss(pred, gt, clamp: float = 1e-7) -> float:
    """Mean binary cross-entropy on probabilities clamped to [clamp, 1 - clamp]."""
    if not 0.0 < clamp < 0.5:
        raise ConfigurationError(f"clamp must lie in (0, 0.5), got {clamp}")
    p, g = _validated_pair(pred, gt)
    pc = np.clip(p, clamp, 1.0 - clamp)
    terms = g * np.log(pc) + (1 - g) * np.log1p(-pc)
    return float(-np.mean(terms))


def dice_ce_loss(pred, gt, cfg: LossConfig) -> float:
    """beta * Dice + (1 - beta) * CE."""
    dice = dice_loss(pred, gt, cfg.epsilon)
    ce = ce_loss(pred, gt, cfg.clamp)
    return cfg.beta * dice + (1.0 - cfg.beta) * ce


def smoothness_loss(pred, lambda_smooth: float = 1.0, normalize: bool = False) -> float:
    """Anisotropic total variation of the map scaled by lambda_smooth.

    Sums |p[i, j] - p[i+1, j]| over vertical neighbours and
    |p[i, j] - p[i, j+1]| over horizontal neighbours. With ``normalize`` the
    sum is divided by the number of neighbour pairs.
    """
    if not lambda_smooth >= 0.0:
        raise ConfigurationError(f"lambda_smooth must be >= 0, got {lambda_smooth}")
    p = as_prob_map(pred)
    total = float(np.sum(np.abs(np.diff(p, axis=0)))) + float(np.sum(np.abs(np.diff(p, axis=1))))
    if normalize:
        pairs = adjacent_pair_count(p.shape)
        total = total / pairs if pairs else 0.0
    return lambda_smooth * total


def cfg_smoothness_loss(pred, cfg: LossConfig) -> float:
    """Smoothness loss using the weight and normalization of a LossConfig."""
    return smoothness_loss(pred, cfg.lambda_smooth, cfg.normalize_smooth)


def combined_loss(pred, gt, t: float, cfg: LossConfig) -> float:
    """Homotopy blend (1 - t) * L_DiceCE + t * L_smooth."""
    t = _check_t(t)
    return blend(dice_ce_loss(pred, gt, cfg), cfg_smoothness_loss(pred, cfg), t)


def blend(dicece: float, smooth: float, t: float) -> float:
    """Affine homotopy blend of two already-computed loss values."""
    return (1.0 - t) * dicece + t * smooth


def loss_components(pred, gt, t: float, cfg: LossConfig) -> Tuple[float, float, float]:
    """Return (L_DiceCE, L_smooth, L_combined) evaluated once each."""
    t = _check_t(t)
    dicece = dice_ce_loss(pred, gt, cfg)
    smooth = cfg_smoothness_loss(pred, cfg)
    return dicece, smooth, blend(dicece, smooth, t)


def dice_gradient(pred, gt, epsilon: float = 1e-6) -> np.ndarray:
    """d L_Dice / d p by the quotient rule."""
    p, g = _validated_pair(pred, gt)
    numerator = 2.0 * float(np.sum(p * g)) + epsilon
    denominator = float(np.sum(p)) + float(np.sum(g)) + epsilon
    return -(2.0 * g * denominator - numerator) / (denominator * denominator)


def ce_gradient(pred, gt, clamp: float = 1e-7) -> np.ndarray:
    """d L_CE / d p; zero wherever the clamp is active."""
    p, g = _validated_pair(pred, gt)
    active = (p < clamp) | (p > 1.0 - clamp)
    pc = np.clip(p, clamp, 1.0 - clamp)
    grad = -(g / pc - (1 - g) / (1.0 - pc)) / p.size
    grad[active] = 0.0
    return grad


def smoothness_gradient(pred, lambda_smooth: float = 1.0, normalize: bool = False) -> np.ndarray:
    """Subgradient of the smoothness loss with sign(0) = 0."""
    p = as_prob_map(pred)
    grad = np.zeros_like(p)

    vertical = np.sign(p[:-1, :] - p[1:, :])
    grad[:-1, :] += vertical
    grad[1:, :] -= vertical

    horizontal = np.sign(p[:, :-1] - p[:, 1:])
    grad[:, :-1] += horizontal
    grad[:, 1:] -= horizontal

    scale = lambda_smooth
    if normalize:
        pairs = adjacent_pair_count(p.shape)
        scale = lambda_smooth / pairs if pairs else 0.0
    return scale * grad


def loss_gradients(pred, gt, t: float, cfg: LossConfig) -> np.ndarray:
    """Gradient of the combined homotopy loss with respect to every pixel.

    Args:
        pred: Probability map
        gt: Binary label mask (treated as constant)
        t: Homotopy parameter in [0, 1]
        cfg: Loss weights

    Returns:
        Array with the shape of ``pred``
    """
    t = _check_t(t)
    d_dice = dice_gradient(pred, gt, cfg.epsilon)
    d_ce = ce_gradient(pred, gt, cfg.clamp)
    d_smooth = smoothness_gradient(pred, cfg.lambda_smooth, cfg.normalize_smooth)
    d_dicece = cfg.beta * d_dice + (1.0 - cfg.beta) * d_ce
    return (1.0 - t) * d_dicece + t * d_smooth


__all__ = [
    "adjacent_pair_count",
    "dice_loss",
    "ce_loss",
    "dice_ce_loss",
    "smoothness_loss",
    "cfg_smoothness_loss",
    "combined_loss",
    "blend",
    "loss_components",
    "dice_gradient",
    "ce_gradient",
    "smoothness_gradient",
    "loss_gradients",
]
