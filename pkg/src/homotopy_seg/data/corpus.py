"""
Corpus storage for homotopy-seg.

Images are stored as binary PPM (P6), masks as binary PGM (P5) with values
0 and 255, and a manifest CSV indexes every patch with its split, scene seed
and flight elevation.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image

from .models import BrushSpec, Patch, SceneSpec, as_label_mask
from .synthdata import brush_annotate, generate_scene, split, tile_patches
from ..utils.exceptions import CheckpointError, UsageError

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["path", "mask_path", "split", "seed", "elevation_m"]
MANIFEST_NAME = "manifest.csv"
SPLIT_TRAIN = "train"
SPLIT_EVAL = "eval"

PathLike = Union[str, Path]


def write_ppm(path: PathLike, image: np.ndarray) -> Path:
    """Write a float image in [0, 1] as 8-bit binary PPM."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(np.ascontiguousarray(data)).save(path, format="PPM")
    return path


def read_ppm(path: PathLike) -> np.ndarray:
    """Read a PPM image as float64 (height, width, 3) in [0, 1]."""
    with Image.open(path) as img:
        data = np.asarray(img.convert("RGB"), dtype=np.float64)
    return data / 255.0


def write_pgm(path: PathLike, mask: np.ndarray) -> Path:
    """Write a {0,1} mask as binary PGM with values 0 and 255."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = as_label_mask(mask, name="mask") * np.uint8(255)
    Image.fromarray(np.ascontiguousarray(data)).save(path, format="PPM")
    return path


def read_pgm(path: PathLike) -> np.ndarray:
    """Read a PGM mask back to {0,1} uint8."""
    with Image.open(path) as img:
        data = np.asarray(img.convert("L"))
    return (data >= 128).astype(np.uint8)


def true_mask_path(mask_path: PathLike) -> Path:
    """Location of the exact mask stored next to an annotated mask."""
    mask_path = Path(mask_path)
    return mask_path.with_name(mask_path.name.replace("_mask.pgm", "_true.pgm"))


def write_corpus(out_dir: PathLike, specs: Sequence[SceneSpec], brush: BrushSpec,
                 patch_size: int = 224, ratio: float = 0.9, seed: int = 0) -> pd.DataFrame:
    """Generate scenes, annotate them, tile, split and write everything.

    Layout under ``out_dir``: ``scenes/`` holds full scenes with their true
    and brush-annotated masks, ``patches/`` holds tiles, and
    ``manifest.csv`` lists every patch.

    Returns:
        The manifest as a DataFrame
    """
    out_dir = Path(out_dir)
    scenes_dir = out_dir / "scenes"

    tiles: List[Tuple[Patch, Patch, SceneSpec]] = []
    for index, spec in enumerate(specs):
        stem = f"scene_{index:03d}"
        image, true_mask = generate_scene(spec)
        annotated = brush_annotate(true_mask, brush)
        write_ppm(scenes_dir / f"{stem}.ppm", image)
        write_pgm(scenes_dir / f"{stem}_true.pgm", true_mask)
        write_pgm(scenes_dir / f"{stem}_mask.pgm", annotated)

        annotated_tiles = tile_patches(image, annotated, patch_size, prefix=f"{stem}_")
        true_tiles = tile_patches(image, true_mask, patch_size, prefix=f"{stem}_")
        tiles.extend((a, t, spec) for a, t in zip(annotated_tiles, true_tiles))
        logger.info(
            f"Scene {index + 1}/{len(specs)}: {spec.width}x{spec.height} at {spec.elevation_m}m, "
            f"{len(annotated_tiles)} patches"
        )

    train, held_out = split(list(range(len(tiles))), ratio=ratio, seed=seed)
    membership: Dict[int, str] = {i: SPLIT_TRAIN for i in train}
    membership.update({i: SPLIT_EVAL for i in held_out})

    rows = []
    for index, (annotated, true_tile, spec) in enumerate(tiles):
        image_rel = Path("patches") / f"{annotated.name}.ppm"
        mask_rel = Path("patches") / f"{annotated.name}_mask.pgm"
        write_ppm(out_dir / image_rel, annotated.image)
        write_pgm(out_dir / mask_rel, annotated.mask)
        write_pgm(true_mask_path(out_dir / mask_rel), true_tile.mask)
        rows.append({
            "path": image_rel.as_posix(),
            "mask_path": mask_rel.as_posix(),
            "split": membership[index],
            "seed": spec.texture_seed,
            "elevation_m": spec.elevation_m,
        })

    manifest = pd.DataFrame(rows, columns=MANIFEST_COLUMNS)
    manifest.to_csv(out_dir / MANIFEST_NAME, index=False)
    logger.info(
        f"Corpus written to {out_dir}: {len(manifest)} patches "
        f"({len(train)} train / {len(held_out)} eval)"
    )
    return manifest


def read_manifest(path: PathLike) -> pd.DataFrame:
    """Load and validate a manifest CSV."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise CheckpointError(f"manifest not found: {path}")
    manifest = pd.read_csv(path)
    missing = [c for c in MANIFEST_COLUMNS if c not in manifest.columns]
    if missing:
        raise UsageError(f"manifest {path} lacks columns {missing}")
    return manifest


def load_patches(manifest_path: PathLike, split_name: Optional[str] = None,
                 labels: str = "brush") -> List[Patch]:
    """Load the patches of one split (or all) in manifest order.

    Args:
        manifest_path: Manifest CSV or the corpus directory
        split_name: "train", "eval" or None for every row
        labels: "brush" for annotated masks, "true" for exact masks
    """
    if labels not in ("brush", "true"):
        raise UsageError(f"labels must be 'brush' or 'true', got {labels!r}")
    manifest_path = Path(manifest_path)
    root = manifest_path if manifest_path.is_dir() else manifest_path.parent
    manifest = read_manifest(manifest_path)
    if split_name is not None:
        manifest = manifest[manifest["split"] == split_name]

    patches = []
    for row in manifest.itertuples(index=False):
        mask_file = root / row.mask_path
        if labels == "true":
            mask_file = true_mask_path(mask_file)
        patches.append(Patch(
            image=read_ppm(root / row.path),
            mask=read_pgm(mask_file),
            name=Path(row.path).stem,
        ))
    logger.debug(f"Loaded {len(patches)} patches (split={split_name}, labels={labels})")
    return patches


__all__ = [
    "MANIFEST_COLUMNS",
    "MANIFEST_NAME",
    "SPLIT_TRAIN",
    "SPLIT_EVAL",
    "write_ppm",
    "read_ppm",
    "write_pgm",
    "read_pgm",
    "true_mask_path",
    "write_corpus",
    "read_manifest",
    "load_patches",
]
