"""
Shared fixtures for the homotopy-seg test suite.
"""

import numpy as np
import pytest

from homotopy_seg.core.model import SegModel, init_model
from homotopy_seg.data.corpus import write_corpus
from homotopy_seg.data.models import BrushSpec, LossConfig, Patch, TrainConfig
from homotopy_seg.data.synthdata import build_scene_specs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def loss_cfg():
    return LossConfig()


@pytest.fixture
def small_model():
    return init_model(seed=42, c_in=3, c_hidden=4)


@pytest.fixture
def zero_model():
    return SegModel(c_in=3, c_hidden=4)


def make_patches(count, size=8, seed=0):
    """Random patches whose mask follows the green channel, so a model can learn it."""
    rng = np.random.default_rng(seed)
    patches = []
    for index in range(count):
        image = rng.uniform(0.0, 1.0, size=(size, size, 3))
        mask = (image[:, :, 1] > 0.5).astype(np.uint8)
        patches.append(Patch(image=image, mask=mask, name=f"p{index:02d}"))
    return patches


@pytest.fixture
def patches():
    return make_patches(6)


@pytest.fixture
def quick_train_config():
    return TrainConfig(epochs=2, batch_size=4, seed=3, alpha_start=1e-2, alpha_end=1e-3,
                       augment=False, loss=LossConfig(normalize_smooth=True))


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Two 128x128 scenes tiled into 32x32 patches (32 patches, 24 train / 8 eval)."""
    out = tmp_path_factory.mktemp("corpus")
    specs = build_scene_specs(count=2, width=128, height=128, grass_fraction=0.5, seed=5)
    write_corpus(out, specs, BrushSpec(diameter_px=8), patch_size=32, ratio=0.75, seed=5)
    return out
