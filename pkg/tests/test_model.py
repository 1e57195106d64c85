"""
Tests for the segmentation model, its backpropagation, Adam and checkpoints.
"""

import json

import numpy as np
import pytest

from homotopy_seg.core.model import (
    CHECKPOINT_MAGIC,
    PARAMETER_BLOCKS,
    AdamState,
    SegModel,
    adam_step,
    adam_update,
    backward,
    forward,
    glorot_bound,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
    zero_gradients,
)
from homotopy_seg.utils.exceptions import (
    CheckpointError,
    ConfigurationError,
    NumericalAbortError,
    ShapeError,
    UsageError,
)


def naive_forward(model, image):
    """Loop-based reference of conv3x3 -> ReLU -> conv3x3 -> sigmoid."""
    height, width, _ = image.shape

    def conv(x, weights, bias):
        padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        out = np.zeros((height, width, weights.shape[3]))
        for r in range(height):
            for c in range(width):
                for k in range(weights.shape[3]):
                    out[r, c, k] = np.sum(padded[r:r + 3, c:c + 3, :] * weights[:, :, :, k]) + bias[k]
        return out

    hidden = np.maximum(conv(image, model.conv1_weights, model.conv1_bias), 0.0)
    logits = conv(hidden, model.conv2_weights, model.conv2_bias)[:, :, 0]
    return 1.0 / (1.0 + np.exp(-logits))


class TestForward:

    def test_zero_model_predicts_half(self, zero_model, rng):
        prob = predict(zero_model, rng.uniform(size=(5, 7, 3)))
        assert prob.shape == (5, 7)
        assert np.all(prob == 0.5)

    def test_output_in_unit_interval(self, small_model, rng):
        prob = predict(small_model, rng.uniform(size=(6, 6, 3)))
        assert np.all((prob > 0.0) & (prob < 1.0))

    def test_matches_loop_reference(self, small_model, rng):
        small_model.conv1_bias = rng.normal(0.0, 0.1, size=small_model.conv1_bias.shape)
        small_model.conv2_bias = rng.normal(0.0, 0.1, size=1)
        image = rng.uniform(size=(5, 4, 3))
        np.testing.assert_allclose(predict(small_model, image), naive_forward(small_model, image), rtol=1e-12)

    def test_same_padding_keeps_shape(self, small_model):
        assert predict(small_model, np.full((224, 224, 3), 0.5)).shape == (224, 224)

    def test_single_pixel_patch(self, small_model):
        assert predict(small_model, np.full((1, 1, 3), 0.3)).shape == (1, 1)

    def test_wrong_channel_count(self, small_model):
        with pytest.raises(ShapeError):
            predict(small_model, np.zeros((4, 4, 2)))

    def test_duplicated_batch_doubles_gradient(self, small_model, rng):
        image = rng.uniform(size=(4, 4, 3))
        upstream = rng.normal(size=(4, 4))
        total = zero_gradients(small_model)
        for _ in range(2):
            _, cache = forward(small_model, image)
            for name, grad in backward(small_model, cache, upstream).items():
                total[name] += grad
        _, cache = forward(small_model, image)
        single = backward(small_model, cache, upstream)
        for name in PARAMETER_BLOCKS:
            np.testing.assert_allclose(total[name], 2.0 * single[name], rtol=1e-12)


class TestBackward:

    def test_gradient_shapes(self, small_model, rng):
        _, cache = forward(small_model, rng.uniform(size=(4, 5, 3)))
        grads = backward(small_model, cache, np.ones((4, 5)))
        for name, param in small_model.parameters().items():
            assert grads[name].shape == param.shape

    def test_matches_finite_differences(self, small_model, rng):
        small_model.conv1_bias = rng.normal(0.0, 0.1, size=small_model.conv1_bias.shape)
        image = rng.uniform(size=(4, 4, 3))
        weights = rng.normal(size=(4, 4))

        def objective():
            return float(np.sum(weights * predict(small_model, image)))

        _, cache = forward(small_model, image)
        grads = backward(small_model, cache, weights)
        h = 1e-6
        for name in ("conv1_bias", "conv2_weights", "conv2_bias"):
            param = getattr(small_model, name)
            index = (0,) * param.ndim
            original = param[index]
            param[index] = original + h
            plus = objective()
            param[index] = original - h
            minus = objective()
            param[index] = original
            assert grads[name][index] == pytest.approx((plus - minus) / (2 * h), rel=1e-5, abs=1e-9)

    def test_zero_upstream_gives_zero_gradients(self, small_model, rng):
        _, cache = forward(small_model, rng.uniform(size=(4, 4, 3)))
        for grad in backward(small_model, cache, np.zeros((4, 4))).values():
            assert np.all(grad == 0.0)

    def test_stale_cache_rejected(self, small_model, rng):
        _, cache = forward(small_model, rng.uniform(size=(3, 3, 3)))
        adam_step(small_model, zero_gradients(small_model), AdamState.for_model(small_model), 0.1)
        with pytest.raises(UsageError):
            backward(small_model, cache, np.ones((3, 3)))

    def test_cache_of_other_model_rejected(self, small_model, rng):
        _, cache = forward(small_model.copy(), rng.uniform(size=(3, 3, 3)))
        with pytest.raises(UsageError):
            backward(small_model, cache, np.ones((3, 3)))

    def test_upstream_shape_mismatch(self, small_model, rng):
        _, cache = forward(small_model, rng.uniform(size=(3, 3, 3)))
        with pytest.raises(ShapeError):
            backward(small_model, cache, np.ones((3, 4)))


class TestAdam:

    def test_first_step_moves_by_learning_rate(self):
        param, m, v = adam_update(np.array([0.0]), np.array([0.3]), np.zeros(1), np.zeros(1), 1, 0.1)
        assert param[0] == pytest.approx(-0.1, rel=1e-6)
        assert m[0] == pytest.approx(0.03)
        assert v[0] == pytest.approx(0.001 * 0.09)

    def test_zero_gradient_leaves_parameters(self, small_model):
        before = {name: p.copy() for name, p in small_model.parameters().items()}
        state = AdamState.for_model(small_model)
        adam_step(small_model, zero_gradients(small_model), state, 0.1)
        assert state.step_count == 1
        for name, param in small_model.parameters().items():
            np.testing.assert_array_equal(param, before[name])

    def test_nonfinite_gradient_aborts(self, small_model):
        grads = zero_gradients(small_model)
        grads["conv2_bias"][0] = np.nan
        state = AdamState.for_model(small_model)
        with pytest.raises(NumericalAbortError) as excinfo:
            adam_step(small_model, grads, state, 0.1)
        assert excinfo.value.block == "conv2_bias"
        assert state.step_count == 0

    def test_nonpositive_learning_rate(self, small_model):
        with pytest.raises(ConfigurationError):
            adam_step(small_model, zero_gradients(small_model), AdamState.for_model(small_model), 0.0)

    def test_missing_gradient_block(self, small_model):
        grads = zero_gradients(small_model)
        del grads["conv1_bias"]
        with pytest.raises(ShapeError):
            adam_step(small_model, grads, AdamState.for_model(small_model), 0.1)


class TestInit:

    def test_weights_within_bound(self):
        model = init_model(seed=7, c_in=3, c_hidden=8)
        assert np.max(np.abs(model.conv1_weights)) <= glorot_bound(27, 72)
        assert np.max(np.abs(model.conv2_weights)) <= glorot_bound(72, 9)
        assert np.all(model.conv1_bias == 0.0)
        assert np.all(model.conv2_bias == 0.0)

    def test_same_seed_same_weights(self):
        a, b = init_model(seed=11), init_model(seed=11)
        for name in PARAMETER_BLOCKS:
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_different_seeds_differ(self):
        assert not np.array_equal(init_model(seed=0).conv1_weights, init_model(seed=1).conv1_weights)

    def test_parameter_count(self):
        model = SegModel(c_in=3, c_hidden=8)
        assert model.parameter_count() == 9 * 3 * 8 + 8 + 9 * 8 + 1

    def test_invalid_channels(self):
        with pytest.raises(ConfigurationError):
            SegModel(c_in=0)


class TestCheckpoint:

    def test_round_trip_is_exact(self, small_model, rng, tmp_path):
        state = AdamState.for_model(small_model)
        grads = {name: rng.normal(size=p.shape) for name, p in small_model.parameters().items()}
        adam_step(small_model, grads, state, 0.01)

        path = save_checkpoint(tmp_path / "model.ckpt", small_model, state)
        model, loaded = load_checkpoint(path)
        assert (model.c_in, model.c_hidden, model.seed) == (3, 4, 42)
        assert loaded.step_count == 1
        for name in PARAMETER_BLOCKS:
            np.testing.assert_array_equal(getattr(model, name), getattr(small_model, name))
            np.testing.assert_array_equal(loaded.first_moment[name], state.first_moment[name])
            np.testing.assert_array_equal(loaded.second_moment[name], state.second_moment[name])

    def test_bytes_are_deterministic(self, small_model, tmp_path):
        state = AdamState.for_model(small_model)
        a = save_checkpoint(tmp_path / "a.ckpt", small_model, state).read_bytes()
        b = save_checkpoint(tmp_path / "b.ckpt", small_model, state).read_bytes()
        assert a == b
        assert a.startswith(CHECKPOINT_MAGIC)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not a checkpoint\n")
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated_payload(self, small_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", small_model, AdamState.for_model(small_model))
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    @staticmethod
    def _rewrite_header(path, edit):
        magic, header, payload = path.read_bytes().split(b"\n", 2)
        data = json.loads(header)
        edit(data)
        path.write_bytes(magic + b"\n" + json.dumps(data, sort_keys=True).encode() + b"\n" + payload)

    def test_header_missing_key(self, small_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", small_model, AdamState.for_model(small_model))
        self._rewrite_header(path, lambda h: h.pop("beta1"))
        with pytest.raises(CheckpointError, match="beta1"):
            load_checkpoint(path)

    def test_unknown_block_name(self, small_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", small_model, AdamState.for_model(small_model))
        self._rewrite_header(path, lambda h: h["blocks"][1].update(name="__class__"))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_block_shape_disagrees_with_channels(self, small_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", small_model, AdamState.for_model(small_model))
        self._rewrite_header(path, lambda h: h.update(c_hidden=5))
        with pytest.raises(CheckpointError, match="block layout"):
            load_checkpoint(path)

    def test_malformed_shape_entry(self, small_model, tmp_path):
        path = save_checkpoint(tmp_path / "model.ckpt", small_model, AdamState.for_model(small_model))
        self._rewrite_header(path, lambda h: h["blocks"][0].update(shape="3x3"))
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
