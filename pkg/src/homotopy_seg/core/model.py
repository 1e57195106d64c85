"""
Segmentation model for homotopy-seg.

A two-layer convolutional network (3x3 conv -> ReLU -> 3x3 conv -> sigmoid)
with zero same-padding, hand-derived backpropagation, a bias-corrected Adam
optimizer and a bit-exact checkpoint codec. Any model exposing the same
forward/backward contract over (H, W, C) patches can replace it in the
trainer.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, Optional, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..data.models import ImagePatch, ProbMap, as_image_patch
from ..utils.exceptions import (
    CheckpointError,
    ConfigurationError,
    NumericalAbortError,
    ShapeError,
    UsageError,
)

logger = logging.getLogger(__name__)

PARAMETER_BLOCKS = ("conv1_weights", "conv1_bias", "conv2_weights", "conv2_bias")
KERNEL_SIZE = 3

CHECKPOINT_MAGIC = b"HSEGCKPT 1\n"
CHECKPOINT_HEADER_KEYS = ("c_in", "c_hidden", "seed", "step_count", "beta1", "beta2", "adam_epsilon", "blocks")


class SegModel:
    """Parameters of the conv3x3 -> ReLU -> conv3x3 -> sigmoid model."""

    def __init__(self, c_in: int = 3, c_hidden: int = 8, seed: Optional[int] = None):
        """Initialize an all-zero model.

        Args:
            c_in: Input channels
            c_hidden: Hidden channels
            seed: Seed the weights were drawn with, recorded in checkpoints
        """
        if c_in < 1 or c_hidden < 1:
            raise ConfigurationError("c_in and c_hidden must be >= 1")
        self.c_in = int(c_in)
        self.c_hidden = int(c_hidden)
        self.seed = seed
        self.conv1_weights = np.zeros((KERNEL_SIZE, KERNEL_SIZE, c_in, c_hidden))
        self.conv1_bias = np.zeros(c_hidden)
        self.conv2_weights = np.zeros((KERNEL_SIZE, KERNEL_SIZE, c_hidden, 1))
        self.conv2_bias = np.zeros(1)
        # Bumped on every in-place update; forward caches record it
        self.version = 0

    def parameters(self) -> Dict[str, np.ndarray]:
        """Parameter blocks by name, in checkpoint order."""
        return {name: getattr(self, name) for name in PARAMETER_BLOCKS}

    def set_parameters(self, params: Dict[str, np.ndarray]) -> None:
        for name in PARAMETER_BLOCKS:
            current = getattr(self, name)
            value = np.asarray(params[name], dtype=np.float64)
            if value.shape != current.shape:
                raise ShapeError(f"{name}: expected shape {current.shape}, got {value.shape}")
            setattr(self, name, value.copy())
        self.version += 1

    def copy(self) -> 'SegModel':
        clone = SegModel(self.c_in, self.c_hidden, self.seed)
        clone.set_parameters(self.parameters())
        return clone

    def parameter_count(self) -> int:
        return sum(int(p.size) for p in self.parameters().values())

    def __repr__(self) -> str:
        return f"SegModel(c_in={self.c_in}, c_hidden={self.c_hidden}, seed={self.seed})"


@dataclass
class AdamState:
    """First/second moment estimates and step counter of Adam."""

    first_moment: Dict[str, np.ndarray]
    second_moment: Dict[str, np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8

    @classmethod
    def for_model(cls, model: SegModel, beta1: float = 0.9, beta2: float = 0.999,
                  adam_epsilon: float = 1e-8) -> 'AdamState':
        params = model.parameters()
        return cls(
            first_moment={name: np.zeros_like(p) for name, p in params.items()},
            second_moment={name: np.zeros_like(p) for name, p in params.items()},
            beta1=beta1,
            beta2=beta2,
            adam_epsilon=adam_epsilon,
        )


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by backward."""

    model_version: int
    model_id: int
    x_windows: np.ndarray
    z1: np.ndarray
    a1_windows: np.ndarray
    prob: np.ndarray
    shape: Tuple[int, int] = field(default=(0, 0))


def _windows(x: np.ndarray) -> np.ndarray:
    """3x3 neighbourhoods of a zero-padded (H, W, C) array as (H, W, C, 3, 3)."""
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    return sliding_window_view(padded, (KERNEL_SIZE, KERNEL_SIZE), axis=(0, 1))


def _conv(windows: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return np.einsum("hwcij,ijck->hwk", windows, weights) + bias


def forward(model: SegModel, patch: ImagePatch) -> Tuple[ProbMap, ForwardCache]:
    """Run the model on one patch.

    Args:
        model: Segmentation model
        patch: (H, W, C_in) image

    Returns:
        Probability map of shape (H, W) and the cache needed by backward
    """
    x = as_image_patch(patch, channels=model.c_in)
    x_windows = _windows(x)
    z1 = _conv(x_windows, model.conv1_weights, model.conv1_bias)
    a1 = np.maximum(z1, 0.0)
    a1_windows = _windows(a1)
    z2 = _conv(a1_windows, model.conv2_weights, model.conv2_bias)[:, :, 0]
    prob = expit(z2)
    cache = ForwardCache(
        model_version=model.version,
        model_id=id(model),
        x_windows=x_windows,
        z1=z1,
        a1_windows=a1_windows,
        prob=prob,
        shape=(int(prob.shape[0]), int(prob.shape[1])),
    )
    return prob, cache


def predict(model: SegModel, patch: ImagePatch) -> ProbMap:
    """Forward pass without keeping the cache."""
    prob, _ = forward(model, patch)
    return prob


def backward(model: SegModel, cache: ForwardCache, upstream_grad: np.ndarray) -> Dict[str, np.ndarray]:
    """Backpropagate d loss / d prob to every parameter block.

    Args:
        model: The model the cache was produced with
        cache: Result of a matching forward call
        upstream_grad: Gradient of the loss with respect to the output map

    Returns:
        Gradient arrays keyed by parameter block name
    """
    if cache.model_id != id(model) or cache.model_version != model.version:
        raise UsageError("forward cache is stale or belongs to a different model")
    upstream = np.asarray(upstream_grad, dtype=np.float64)
    if upstream.shape != cache.shape:
        raise ShapeError(f"upstream gradient shape {upstream.shape} != output shape {cache.shape}")

    height, width = cache.shape
    prob = cache.prob
    dz2 = upstream * prob * (1.0 - prob)

    d_conv2_weights = np.einsum("hwcij,hw->ijc", cache.a1_windows, dz2)[..., np.newaxis]
    d_conv2_bias = np.array([np.sum(dz2)])

    # Transposed convolution: scatter each output gradient back over its 3x3 window
    da1_padded = np.zeros((height + 2, width + 2, model.c_hidden))
    for i in range(KERNEL_SIZE):
        for j in range(KERNEL_SIZE):
            da1_padded[i:i + height, j:j + width, :] += dz2[:, :, np.newaxis] * model.conv2_weights[i, j, :, 0]
    da1 = da1_padded[1:-1, 1:-1, :]
    dz1 = da1 * (cache.z1 > 0.0)

    d_conv1_weights = np.einsum("hwcij,hwk->ijck", cache.x_windows, dz1)
    d_conv1_bias = np.sum(dz1, axis=(0, 1))

    return {
        "conv1_weights": d_conv1_weights,
        "conv1_bias": d_conv1_bias,
        "conv2_weights": d_conv2_weights,
        "conv2_bias": d_conv2_bias,
    }


def zero_gradients(model: SegModel) -> Dict[str, np.ndarray]:
    return {name: np.zeros_like(p) for name, p in model.parameters().items()}


def adam_update(param: np.ndarray, grad: np.ndarray, m: np.ndarray, v: np.ndarray,
                step: int, alpha: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One bias-corrected Adam update of a single parameter array.

    Args:
        param: Current parameter values
        grad: Gradient of the loss
        m: First moment estimate
        v: Second moment estimate
        step: 1-based update counter used for bias correction
        alpha: Learning rate

    Returns:
        (new_param, new_m, new_v)
    """
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    return param - alpha * m_hat / (np.sqrt(v_hat) + eps), m, v


def adam_step(model: SegModel, grads: Dict[str, np.ndarray], state: AdamState, alpha: float) -> None:
    """Apply one Adam update to every parameter block in place.

    Args:
        model: Model updated in place (caller must hold exclusive access)
        grads: Gradients keyed by block name
        state: Optimizer state updated in place
        alpha: Learning rate
    """
    if not alpha > 0.0:
        raise ConfigurationError(f"learning rate must be > 0, got {alpha}")
    for name, param in model.parameters().items():
        grad = grads.get(name)
        if grad is None or np.shape(grad) != param.shape:
            raise ShapeError(f"gradient for {name} missing or mis-shaped")
        if state.first_moment[name].shape != param.shape:
            raise ShapeError(f"optimizer state for {name} does not match the model")
        if not np.all(np.isfinite(grad)):
            bad = int(np.count_nonzero(~np.isfinite(grad)))
            raise NumericalAbortError(
                f"nonfinite gradient in block {name} ({bad} of {grad.size} entries)",
                step=state.step_count + 1,
                block=name,
            )

    state.step_count += 1
    for name, param in model.parameters().items():
        new_param, state.first_moment[name], state.second_moment[name] = adam_update(
            param, grads[name], state.first_moment[name], state.second_moment[name],
            state.step_count, alpha, state.beta1, state.beta2, state.adam_epsilon,
        )
        setattr(model, name, new_param)
    model.version += 1


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_model(seed: int, c_in: int = 3, c_hidden: int = 8) -> SegModel:
    """Draw fan-scaled uniform weights; biases start at zero."""
    model = SegModel(c_in, c_hidden, seed=seed)
    rng = np.random.default_rng(seed)
    area = KERNEL_SIZE * KERNEL_SIZE

    a1 = glorot_bound(area * c_in, area * c_hidden)
    a2 = glorot_bound(area * c_hidden, area * 1)
    model.conv1_weights = rng.uniform(-a1, a1, size=model.conv1_weights.shape)
    model.conv2_weights = rng.uniform(-a2, a2, size=model.conv2_weights.shape)
    logger.debug(f"Initialized {model!r} with bounds conv1={a1:.4f}, conv2={a2:.4f}")
    return model


def _checkpoint_blocks(model: SegModel, state: AdamState) -> Iterator[Tuple[str, np.ndarray]]:
    for name in PARAMETER_BLOCKS:
        yield name, getattr(model, name)
    for name in PARAMETER_BLOCKS:
        yield f"m.{name}", state.first_moment[name]
    for name in PARAMETER_BLOCKS:
        yield f"v.{name}", state.second_moment[name]


def save_checkpoint(path: Union[str, Path], model: SegModel, state: AdamState) -> Path:
    """Write model parameters and optimizer state.

    The file holds a magic line, one JSON header line and the raw
    little-endian float64 payload; it contains no timestamps.
    """
    path = Path(path)
    blocks = list(_checkpoint_blocks(model, state))
    header = {
        "c_in": model.c_in,
        "c_hidden": model.c_hidden,
        "seed": model.seed,
        "step_count": state.step_count,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "adam_epsilon": state.adam_epsilon,
        "blocks": [{"name": name, "shape": list(arr.shape)} for name, arr in blocks],
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, arr in blocks:
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    logger.debug(f"Checkpoint written: {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[SegModel, AdamState]:
    """Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointError: If the file is missing, is not a checkpoint, or its
            header or payload does not describe a complete model
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        if f.readline() != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a homotopy-seg checkpoint")
        try:
            header = json.loads(f.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"{path}: corrupt checkpoint header ({e})") from e
        payload = f.read()

    if not isinstance(header, dict):
        raise CheckpointError(f"{path}: checkpoint header is not an object")
    missing = [key for key in CHECKPOINT_HEADER_KEYS if key not in header]
    if missing:
        raise CheckpointError(f"{path}: checkpoint header lacks {missing}")
    try:
        model = SegModel(int(header["c_in"]), int(header["c_hidden"]), seed=header["seed"])
        state = AdamState.for_model(model, float(header["beta1"]), float(header["beta2"]),
                                    float(header["adam_epsilon"]))
        state.step_count = int(header["step_count"])
        layout = [(str(block["name"]), tuple(int(n) for n in block["shape"])) for block in header["blocks"]]
    except (ConfigurationError, KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{path}: invalid checkpoint header ({e})") from e

    expected = [(name, arr.shape) for name, arr in _checkpoint_blocks(model, state)]
    if layout != expected:
        raise CheckpointError(
            f"{path}: block layout {layout} does not match a model with "
            f"c_in={model.c_in}, c_hidden={model.c_hidden}"
        )

    offset = 0
    for name, shape in expected:
        count = int(np.prod(shape))
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise CheckpointError(f"{path}: truncated payload at block {name}")
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes

        if name.startswith("m."):
            state.first_moment[name[2:]] = arr
        elif name.startswith("v."):
            state.second_moment[name[2:]] = arr
        else:
            setattr(model, name, arr)
    if offset != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - offset} trailing bytes")
    return model, state


__all__ = [
    "PARAMETER_BLOCKS",
    "SegModel",
    "AdamState",
    "ForwardCache",
    "forward",
    "predict",
    "backward",
    "zero_gradients",
    "adam_update",
    "adam_step",
    "glorot_bound",
    "init_model",
    "save_checkpoint",
    "load_checkpoint",
]
