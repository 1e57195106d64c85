"""
Synthetic aerial scenes and the annotation pipeline.

Generates grass / non-grass scenes with exact ground truth, simulates the
circle-brush annotation artifacts with a morphological closing, converts
flight elevation to ground sample distance, and tiles, splits and augments
patches for training.

The scene texture model is a deliberate stand-in: value noise with fixed
palettes. Only its determinism and label correctness matter downstream.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple, TypeVar

import numpy as np
from scipy import ndimage

from .models import (
    AnnotationFootprint,
    AugmentParams,
    BrushSpec,
    LabelMask,
    Patch,
    SceneSpec,
    as_label_mask,
)
from ..utils.exceptions import ConfigurationError, UsageError

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Ground sample distance of the survey camera at the reference flight height
REFERENCE_ELEVATION_M = 10.0
REFERENCE_GSD_CM = 0.2

PALETTE = {
    "grass": np.array([0.30, 0.55, 0.18]),
    "soil": np.array([0.52, 0.40, 0.26]),
    "fence": np.array([0.92, 0.90, 0.86]),
}

FENCE_WIDTH_PX = 2
JITTER_RANGE = (0.9, 1.1)


def _value_noise(rng: np.random.Generator, height: int, width: int, cell: float) -> np.ndarray:
    """Smoothly interpolated lattice noise in [0, 1] with the given cell size."""
    cell = max(float(cell), 1.0)
    lattice = rng.random((int(height / cell) + 2, int(width / cell) + 2))

    ys = np.arange(height) / cell
    xs = np.arange(width) / cell
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = ys - y0
    fx = xs - x0
    # smoothstep
    fy = fy * fy * (3.0 - 2.0 * fy)
    fx = fx * fx * (3.0 - 2.0 * fx)

    top = lattice[np.ix_(y0, x0)] * (1.0 - fx) + lattice[np.ix_(y0, x0 + 1)] * fx
    bottom = lattice[np.ix_(y0 + 1, x0)] * (1.0 - fx) + lattice[np.ix_(y0 + 1, x0 + 1)] * fx
    return top * (1.0 - fy[:, np.newaxis]) + bottom * fy[:, np.newaxis]


def _texture_cells(spec: SceneSpec) -> Tuple[float, float, float]:
    """Cell sizes (layout, grass texture, soil texture) for a flight height.

    Higher flights see more ground per pixel, so every feature shrinks.
    """
    scale = REFERENCE_ELEVATION_M / spec.elevation_m
    layout = max(8.0, min(spec.width, spec.height) / 4.0 * math.sqrt(min(scale, 1.0)))
    grass = max(1.0, 6.0 * scale)
    soil = max(2.0, 48.0 * scale)
    return layout, grass, soil


def generate_scene(spec: SceneSpec) -> Tuple[np.ndarray, LabelMask]:
    """Render a scene and its exact grass mask.

    Args:
        spec: Scene parameters

    Returns:
        (image, mask): float64 (height, width, 3) image in [0, 1] and
        uint8 (height, width) mask with 1 for grass
    """
    if spec.width < SceneSpec.MIN_SIZE or spec.height < SceneSpec.MIN_SIZE:
        raise UsageError(
            f"scene {spec.width}x{spec.height} is smaller than {SceneSpec.MIN_SIZE}x{SceneSpec.MIN_SIZE}"
        )
    rng = np.random.default_rng(spec.texture_seed)
    height, width = spec.height, spec.width
    layout_cell, grass_cell, soil_cell = _texture_cells(spec)

    layout = _value_noise(rng, height, width, layout_cell)
    layout += 0.3 * _value_noise(rng, height, width, layout_cell / 4.0)
    cut = np.quantile(layout, 1.0 - spec.grass_fraction)
    grass = layout >= cut

    grass_texture = _value_noise(rng, height, width, grass_cell)
    soil_texture = _value_noise(rng, height, width, soil_cell)
    grass_rgb = PALETTE["grass"] * (0.6 + 0.8 * grass_texture)[..., np.newaxis]
    soil_rgb = PALETTE["soil"] * (0.75 + 0.5 * soil_texture)[..., np.newaxis]
    image = np.where(grass[..., np.newaxis], grass_rgb, soil_rgb)

    for _ in range(spec.fence_lines):
        vertical = bool(rng.integers(2))
        extent = width if vertical else height
        start = int(rng.integers(0, extent - FENCE_WIDTH_PX + 1))
        if vertical:
            image[:, start:start + FENCE_WIDTH_PX] = PALETTE["fence"]
            grass[:, start:start + FENCE_WIDTH_PX] = False
        else:
            image[start:start + FENCE_WIDTH_PX, :] = PALETTE["fence"]
            grass[start:start + FENCE_WIDTH_PX, :] = False

    mask = grass.astype(np.uint8)
    logger.debug(
        f"Scene {width}x{height} seed={spec.texture_seed} elevation={spec.elevation_m}m "
        f"grass fraction {mask.mean():.3f}"
    )
    return np.clip(image, 0.0, 1.0), mask


def disk_footprint(diameter: int) -> np.ndarray:
    """Boolean diameter x diameter disk centred at (d/2 - 0.5, d/2 - 0.5)."""
    if diameter < 1:
        raise ConfigurationError(f"disk diameter must be >= 1, got {diameter}")
    centre = diameter / 2.0 - 0.5
    yy, xx = np.mgrid[0:diameter, 0:diameter]
    return (yy - centre) ** 2 + (xx - centre) ** 2 <= (diameter / 2.0) ** 2


def brush_annotate(true_mask, brush: BrushSpec) -> LabelMask:
    """Simulate a circle-brush annotation as a morphological closing.

    Concavities and non-grass holes narrower than the brush are absorbed
    into grass; true grass is never removed. Pixels outside the mask count
    as non-grass.
    """
    mask = as_label_mask(true_mask, name="true_mask")
    d = brush.diameter_px
    if d > min(mask.shape):
        raise UsageError(f"brush diameter {d} exceeds mask dimensions {mask.shape}")
    if d == 1:
        return mask.copy()

    footprint = disk_footprint(d)
    padded = np.pad(mask.astype(bool), d)
    dilated = ndimage.binary_dilation(padded, structure=footprint)
    closed = ndimage.binary_erosion(dilated, structure=footprint)
    return closed[d:-d, d:-d].astype(np.uint8)


def gsd_at_elevation(elevation_m: float) -> float:
    """Ground sample distance in cm per pixel; linear in flight height."""
    if not elevation_m > 0.0:
        raise UsageError(f"elevation must be > 0, got {elevation_m}")
    return elevation_m / (REFERENCE_ELEVATION_M / REFERENCE_GSD_CM)


def min_annotatable_area(brush: BrushSpec, gsd_cm_per_px: float) -> AnnotationFootprint:
    """Ground area (cm^2) and linear extent (cm) of one brush dab."""
    radius_cm = brush.diameter_px / 2.0 * gsd_cm_per_px
    return AnnotationFootprint(
        area_cm2=math.pi * radius_cm * radius_cm,
        extent_cm=brush.diameter_px * gsd_cm_per_px,
    )


def annotation_error_at_elevation(brush: BrushSpec, elevation_m: float) -> AnnotationFootprint:
    """Brush footprint on the ground at a given flight height."""
    return min_annotatable_area(brush, gsd_at_elevation(elevation_m))


def patch_grid_shape(height: int, width: int, patch_size: int = 224) -> Tuple[int, int]:
    """(rows, cols) of non-overlapping patches; remainders are dropped."""
    if patch_size < 1:
        raise ConfigurationError(f"patch size must be >= 1, got {patch_size}")
    if height < patch_size or width < patch_size:
        raise UsageError(f"image {width}x{height} is smaller than patch size {patch_size}")
    return height // patch_size, width // patch_size


def tile_patches(image: np.ndarray, mask: np.ndarray, patch_size: int = 224,
                 prefix: str = "") -> List[Patch]:
    """Cut an image and its mask into row-major non-overlapping patches."""
    if image.shape[:2] != mask.shape[:2]:
        raise UsageError(f"image {image.shape[:2]} and mask {mask.shape[:2]} differ in size")
    rows, cols = patch_grid_shape(image.shape[0], image.shape[1], patch_size)
    patches = []
    for r in range(rows):
        for c in range(cols):
            ys = slice(r * patch_size, (r + 1) * patch_size)
            xs = slice(c * patch_size, (c + 1) * patch_size)
            patches.append(Patch(
                image=image[ys, xs],
                mask=mask[ys, xs],
                name=f"{prefix}r{r:02d}_c{c:02d}",
                row=r,
                col=c,
            ))
    return patches


def reassemble_patches(patches: Sequence[Patch], rows: int, cols: int) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of tile_patches over the cropped region."""
    if len(patches) != rows * cols or not patches:
        raise UsageError(f"expected {rows * cols} patches, got {len(patches)}")
    image_rows = [np.concatenate([p.image for p in patches[r * cols:(r + 1) * cols]], axis=1)
                  for r in range(rows)]
    mask_rows = [np.concatenate([p.mask for p in patches[r * cols:(r + 1) * cols]], axis=1)
                 for r in range(rows)]
    return np.concatenate(image_rows, axis=0), np.concatenate(mask_rows, axis=0)


def split(items: Sequence[T], ratio: float = 0.9, seed: int = 0) -> Tuple[List[T], List[T]]:
    """Seeded shuffle, then cut at floor(ratio * n) into (train, eval)."""
    if not 0.0 < ratio < 1.0:
        raise ConfigurationError(f"split ratio must lie in (0, 1), got {ratio}")
    if len(items) == 0:
        raise UsageError("cannot split an empty collection")
    order = np.random.default_rng(seed).permutation(len(items))
    cut = math.floor(ratio * len(items))
    return [items[i] for i in order[:cut]], [items[i] for i in order[cut:]]


def draw_augmentation(seed, square: bool = True) -> AugmentParams:
    """Draw rotation, flips and per-channel jitter from a seed."""
    rng = np.random.default_rng(seed)
    rotations = int(rng.integers(4))
    flip_horizontal = bool(rng.random() < 0.5)
    flip_vertical = bool(rng.random() < 0.5)
    jitter = tuple(float(j) for j in rng.uniform(*JITTER_RANGE, size=3))
    if not square and rotations % 2 == 1:
        raise UsageError("90/270 degree rotation requires a square patch")
    return AugmentParams(rotations, flip_horizontal, flip_vertical, jitter)


def apply_augmentation(patch: np.ndarray, mask: np.ndarray,
                       params: AugmentParams) -> Tuple[np.ndarray, np.ndarray]:
    """Apply one augmentation draw; colour jitter touches the image only."""
    if params.rotations % 2 == 1 and patch.shape[0] != patch.shape[1]:
        raise UsageError("90/270 degree rotation requires a square patch")
    image = np.rot90(patch, params.rotations, axes=(0, 1))
    labels = np.rot90(mask, params.rotations, axes=(0, 1))
    if params.flip_horizontal:
        image = image[:, ::-1]
        labels = labels[:, ::-1]
    if params.flip_vertical:
        image = image[::-1, :]
        labels = labels[::-1, :]
    image = np.clip(image * np.asarray(params.jitter), 0.0, 1.0)
    return image, np.ascontiguousarray(labels)


def augment(patch: np.ndarray, mask: np.ndarray, seed) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded random rotation, flips and colour jitter."""
    params = draw_augmentation(seed, square=patch.shape[0] == patch.shape[1])
    return apply_augmentation(patch, mask, params)


def build_scene_specs(count: int, width: int, height: int, grass_fraction: float,
                      seed: int, fence_lines: int = 0,
                      elevations: Optional[Sequence[float]] = None) -> List[SceneSpec]:
    """Scene specs for a corpus; elevations are assigned round-robin."""
    if count < 1:
        raise ConfigurationError(f"scene count must be >= 1, got {count}")
    elevations = list(elevations or [REFERENCE_ELEVATION_M])
    return [
        SceneSpec(
            width=width,
            height=height,
            grass_fraction=grass_fraction,
            texture_seed=seed * 1000 + index,
            fence_lines=fence_lines,
            elevation_m=float(elevations[index % len(elevations)]),
        )
        for index in range(count)
    ]


__all__ = [
    "REFERENCE_ELEVATION_M",
    "REFERENCE_GSD_CM",
    "generate_scene",
    "disk_footprint",
    "brush_annotate",
    "gsd_at_elevation",
    "min_annotatable_area",
    "annotation_error_at_elevation",
    "patch_grid_shape",
    "tile_patches",
    "reassemble_patches",
    "split",
    "draw_augmentation",
    "apply_augmentation",
    "augment",
    "build_scene_specs",
]
