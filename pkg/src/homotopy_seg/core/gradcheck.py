"""
Finite-difference gradient verification.

Compares every analytic gradient of the loss functions and of the model
parameters with central finite differences on seeded random instances.
Components sitting on a non-differentiable point (an adjacent-pixel tie
of the smoothness term, an active clamp, a ReLU switching between the
two perturbations) are skipped and counted.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np

from ..data.models import GradcheckConfig, LossConfig
from ..utils.exceptions import GradientCheckError
from .losses import (
    ce_gradient,
    ce_loss,
    cfg_smoothness_loss,
    combined_loss,
    dice_ce_loss,
    dice_gradient,
    dice_loss,
    loss_gradients,
    smoothness_gradient,
)
from .model import PARAMETER_BLOCKS, SegModel, backward, forward, init_model

logger = logging.getLogger(__name__)

LOSS_BLOCKS = ("dice", "ce", "dicece", "smoothness", "combined")
SMOOTH_BLOCKS = ("smoothness", "combined")
CLAMPED_BLOCKS = ("ce", "dicece", "combined")

ERROR_FLOOR = 1e-7
# Components far below the largest gradient of an instance are compared on that scale
SCALE_FRACTION = 1e-3
MIN_PIXEL_GAP = 1e-6

LossPair = Tuple[Callable[[np.ndarray], float], Callable[[np.ndarray], np.ndarray]]


@dataclass
class BlockResult:
    """Outcome of checking one gradient block at one instance size."""

    name: str
    size: Tuple[int, int]
    tolerance: float
    checked: int = 0
    skipped: int = 0
    max_rel_error: float = 0.0

    @property
    def label(self) -> str:
        return f"{self.name}@{self.size[0]}x{self.size[1]}"

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error <= self.tolerance

    def record(self, error: float) -> None:
        self.checked += 1
        if error > self.max_rel_error:
            self.max_rel_error = error

    def to_dict(self) -> Dict[str, Any]:
        return {
            "block": self.label,
            "checked": self.checked,
            "skipped": self.skipped,
            "max_rel_error": float(self.max_rel_error),
            "tolerance": float(self.tolerance),
            "passed": self.passed,
        }


@dataclass
class GradcheckReport:
    """All block results of one verification run."""

    blocks: List[BlockResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(block.passed for block in self.blocks)

    def failures(self) -> List[BlockResult]:
        return [block for block in self.blocks if not block.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "blocks": [block.to_dict() for block in self.blocks]}

    def summary_lines(self) -> List[str]:
        """One aligned line per block."""
        width = max((len(block.label) for block in self.blocks), default=0)
        return [
            f"{block.label:<{width}}  max_rel_error={block.max_rel_error:.3e}  "
            f"tol={block.tolerance:.0e}  checked={block.checked}  skipped={block.skipped}  "
            f"{'ok' if block.passed else 'FAIL'}"
            for block in self.blocks
        ]

    def raise_on_failure(self) -> None:
        failed = self.failures()
        if failed:
            raise GradientCheckError(
                f"{len(failed)} gradient block(s) disagree with finite differences: "
                + ", ".join(block.label for block in failed),
                components={block.label: block.max_rel_error for block in failed},
                block=failed[0].label,
            )


def relative_error(analytic: float, numeric: float, scale: float = 0.0) -> float:
    """|a - n| / max(|a|, |n|, scale, ERROR_FLOOR)."""
    denominator = max(abs(analytic), abs(numeric), scale, ERROR_FLOOR)
    return abs(analytic - numeric) / denominator


def central_difference(fn: Callable[[np.ndarray], float], values: np.ndarray,
                       index: Tuple[int, ...], step: float) -> float:
    """(f(x + h e_i) - f(x - h e_i)) / 2h for one component."""
    plus = values.copy()
    minus = values.copy()
    plus[index] += step
    minus[index] -= step
    return (fn(plus) - fn(minus)) / (2.0 * step)


def _random_loss_config(rng: np.random.Generator) -> LossConfig:
    return LossConfig(
        beta=float(rng.uniform(0.0, 1.0)),
        lambda_smooth=float(rng.uniform(0.1, 1.0)),
        normalize_smooth=bool(rng.integers(2)),
    )


def _loss_pairs(gt: np.ndarray, t: float, cfg: LossConfig) -> Dict[str, LossPair]:
    def dicece_grad(p):
        return cfg.beta * dice_gradient(p, gt, cfg.epsilon) + (1.0 - cfg.beta) * ce_gradient(p, gt, cfg.clamp)

    return {
        "dice": (lambda p: dice_loss(p, gt, cfg.epsilon), lambda p: dice_gradient(p, gt, cfg.epsilon)),
        "ce": (lambda p: ce_loss(p, gt, cfg.clamp), lambda p: ce_gradient(p, gt, cfg.clamp)),
        "dicece": (lambda p: dice_ce_loss(p, gt, cfg), dicece_grad),
        "smoothness": (
            lambda p: cfg_smoothness_loss(p, cfg),
            lambda p: smoothness_gradient(p, cfg.lambda_smooth, cfg.normalize_smooth),
        ),
        "combined": (lambda p: combined_loss(p, gt, t, cfg), lambda p: loss_gradients(p, gt, t, cfg)),
    }


def near_kink(pred: np.ndarray, step: float) -> np.ndarray:
    """Pixels with an adjacent neighbour closer than the perturbation can separate."""
    gap = max(MIN_PIXEL_GAP, 2.0 * step)
    near = np.zeros(pred.shape, dtype=bool)
    vertical = np.abs(np.diff(pred, axis=0)) <= gap
    near[:-1, :] |= vertical
    near[1:, :] |= vertical
    horizontal = np.abs(np.diff(pred, axis=1)) <= gap
    near[:, :-1] |= horizontal
    near[:, 1:] |= horizontal
    return near


def near_clamp(pred: np.ndarray, clamp: float, step: float) -> np.ndarray:
    return (pred < clamp + step) | (pred > 1.0 - clamp - step)


def check_loss_gradients(config: GradcheckConfig) -> List[BlockResult]:
    """Verify every loss gradient on random (pred, gt, t, cfg) instances.

    Args:
        config: Instance count, sizes, step and tolerance

    Returns:
        One BlockResult per loss and instance size
    """
    rng = np.random.default_rng([config.seed, 0])
    h = config.loss_step
    results = []
    for size in config.sizes:
        blocks = {name: BlockResult(name, size, config.loss_rtol) for name in LOSS_BLOCKS}
        for _ in range(config.instances):
            pred = rng.uniform(0.05, 0.95, size=size)
            gt = rng.integers(0, 2, size=size).astype(np.uint8)
            t = float(rng.uniform(0.0, 1.0))
            cfg = _random_loss_config(rng)
            kinked = near_kink(pred, h)
            clamped = near_clamp(pred, cfg.clamp, h)

            for name, (fn, grad_fn) in _loss_pairs(gt, t, cfg).items():
                block = blocks[name]
                analytic = grad_fn(pred)
                scale = SCALE_FRACTION * float(np.max(np.abs(analytic)))
                skip = np.zeros(size, dtype=bool)
                if name in SMOOTH_BLOCKS:
                    skip |= kinked
                if name in CLAMPED_BLOCKS:
                    skip |= clamped
                for index in np.ndindex(*size):
                    if skip[index]:
                        block.skipped += 1
                        continue
                    numeric = central_difference(fn, pred, index, h)
                    block.record(relative_error(float(analytic[index]), numeric, scale))
        results.extend(blocks.values())
    return results


def _random_model(rng: np.random.Generator, c_hidden: int) -> SegModel:
    model = init_model(int(rng.integers(2**31)), c_in=3, c_hidden=c_hidden)
    params = model.parameters()
    params["conv1_bias"] = rng.normal(0.0, 0.1, size=params["conv1_bias"].shape)
    params["conv2_bias"] = rng.normal(0.0, 0.1, size=params["conv2_bias"].shape)
    model.set_parameters(params)
    return model


def _same_kinks(first, second) -> bool:
    """True when two forward passes share the ReLU pattern and pixel orderings."""
    prob_a, cache_a = first
    prob_b, cache_b = second
    if np.any((cache_a.z1 > 0.0) != (cache_b.z1 > 0.0)):
        return False
    for axis in (0, 1):
        if np.any(np.sign(np.diff(prob_a, axis=axis)) != np.sign(np.diff(prob_b, axis=axis))):
            return False
    return True


def check_model_gradients(config: GradcheckConfig, perturb_weights: float = 1.0) -> List[BlockResult]:
    """Verify backward against finite differences of the combined loss.

    Args:
        config: Instance count, sizes, step and tolerance
        perturb_weights: Factor applied to the analytic conv1_weights
            gradient; anything but 1 injects a deliberate error

    Returns:
        One BlockResult per parameter block and instance size
    """
    rng = np.random.default_rng([config.seed, 1])
    h = config.model_step
    results = []
    for size in config.sizes:
        blocks = {name: BlockResult(name, size, config.model_rtol) for name in PARAMETER_BLOCKS}
        for _ in range(config.instances):
            model = _random_model(rng, config.c_hidden)
            image = rng.uniform(0.0, 1.0, size=(size[0], size[1], 3))
            gt = rng.integers(0, 2, size=size).astype(np.uint8)
            t = float(rng.uniform(0.0, 1.0))
            cfg = _random_loss_config(rng)

            prob, cache = forward(model, image)
            grads = backward(model, cache, loss_gradients(prob, gt, t, cfg))
            grads["conv1_weights"] = grads["conv1_weights"] * perturb_weights
            scale = SCALE_FRACTION * max(float(np.max(np.abs(g))) for g in grads.values())

            for name in PARAMETER_BLOCKS:
                block = blocks[name]
                param = getattr(model, name)
                for index in np.ndindex(*param.shape):
                    original = param[index]
                    param[index] = original + h
                    plus = forward(model, image)
                    param[index] = original - h
                    minus = forward(model, image)
                    param[index] = original
                    if not _same_kinks(plus, minus):
                        block.skipped += 1
                        continue
                    numeric = (combined_loss(plus[0], gt, t, cfg) - combined_loss(minus[0], gt, t, cfg)) / (2.0 * h)
                    block.record(relative_error(float(grads[name][index]), numeric, scale))
        results.extend(blocks.values())
    return results


def run_gradcheck(config: GradcheckConfig, perturb_weights: float = 1.0) -> GradcheckReport:
    """Check loss gradients, then model parameter gradients.

    Returns:
        GradcheckReport; call ``raise_on_failure`` to turn failures into
        a GradientCheckError
    """
    logger.info(
        f"Gradient check: {config.instances} instances per size, sizes "
        f"{', '.join(f'{h}x{w}' for h, w in config.sizes)}"
    )
    report = GradcheckReport()
    report.blocks.extend(check_loss_gradients(config))
    report.blocks.extend(check_model_gradients(config, perturb_weights))
    for block in report.blocks:
        level = logging.INFO if block.passed else logging.ERROR
        logger.log(level, f"{block.label}: max relative error {block.max_rel_error:.3e} "
                          f"({block.checked} checked, {block.skipped} skipped)")
    return report


__all__ = [
    "LOSS_BLOCKS",
    "BlockResult",
    "GradcheckReport",
    "relative_error",
    "central_difference",
    "near_kink",
    "near_clamp",
    "check_loss_gradients",
    "check_model_gradients",
    "run_gradcheck",
]
