"""
Tests for the loss functions and their gradients.
"""

import math

import numpy as np
import pytest

from homotopy_seg.core.losses import (
    adjacent_pair_count,
    ce_gradient,
    ce_loss,
    combined_loss,
    dice_ce_loss,
    dice_gradient,
    dice_loss,
    loss_components,
    loss_gradients,
    smoothness_gradient,
    smoothness_loss,
)
from homotopy_seg.data.models import LossConfig
from homotopy_seg.utils.exceptions import ConfigurationError, ShapeError


class TestDiceLoss:

    def test_perfect_overlap_is_zero(self):
        ones = np.ones((2, 2))
        assert dice_loss(ones, ones.astype(np.uint8), 1e-6) == pytest.approx(0.0, abs=1e-15)

    def test_no_overlap(self):
        loss = dice_loss(np.zeros((2, 2)), np.ones((2, 2), dtype=np.uint8), 1e-6)
        assert loss == pytest.approx(1.0 - 1e-6 / (4.0 + 1e-6))

    def test_uniform_half(self):
        pred = np.full((2, 2), 0.5)
        gt = np.array([[1, 1], [0, 0]])
        assert dice_loss(pred, gt, 1e-12) == pytest.approx(0.5, abs=1e-9)

    def test_nonpositive_epsilon_rejected(self):
        with pytest.raises(ConfigurationError):
            dice_loss(np.zeros((2, 2)), np.zeros((2, 2)), 0.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            dice_loss(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_pred_out_of_range(self):
        with pytest.raises(ConfigurationError):
            dice_loss(np.full((2, 2), 1.5), np.zeros((2, 2)))

    def test_gt_not_binary(self):
        with pytest.raises(ConfigurationError):
            dice_loss(np.zeros((2, 2)), np.full((2, 2), 0.5))


class TestCrossEntropy:

    def test_uniform_half_is_ln2(self, rng):
        gt = rng.integers(0, 2, size=(3, 4))
        assert ce_loss(np.full((3, 4), 0.5), gt) == pytest.approx(math.log(2.0))

    def test_single_pixel(self):
        assert ce_loss(np.array([[0.9]]), np.array([[1]])) == pytest.approx(-math.log(0.9))

    def test_clamp_boundary(self):
        loss = ce_loss(np.array([[1.0]]), np.array([[1]]), clamp=1e-7)
        assert loss == pytest.approx(-math.log(1.0 - 1e-7), rel=1e-9)
        assert loss > 0.0

    def test_finite_at_extremes(self):
        pred = np.array([[0.0, 1.0]])
        gt = np.array([[1, 0]])
        assert math.isfinite(ce_loss(pred, gt))


class TestDiceCE:

    def test_beta_endpoints(self, rng):
        pred = rng.uniform(size=(4, 4))
        gt = rng.integers(0, 2, size=(4, 4))
        assert dice_ce_loss(pred, gt, LossConfig(beta=1.0)) == dice_loss(pred, gt, 1e-6)
        assert dice_ce_loss(pred, gt, LossConfig(beta=0.0)) == ce_loss(pred, gt, 1e-7)

    def test_composed_example(self):
        pred = np.full((2, 2), 0.5)
        gt = np.array([[1, 1], [0, 0]])
        cfg = LossConfig(beta=0.5, epsilon=1e-12)
        assert dice_ce_loss(pred, gt, cfg) == pytest.approx(0.5 * 0.5 + 0.5 * math.log(2.0), abs=1e-9)

    def test_pixel_permutation_invariance(self, rng, loss_cfg):
        pred = rng.uniform(size=(5, 5))
        gt = rng.integers(0, 2, size=(5, 5))
        order = rng.permutation(25)
        p2 = pred.ravel()[order].reshape(5, 5)
        g2 = gt.ravel()[order].reshape(5, 5)
        assert dice_ce_loss(p2, g2, loss_cfg) == pytest.approx(dice_ce_loss(pred, gt, loss_cfg), rel=1e-12)


class TestSmoothnessLoss:

    def test_constant_map(self):
        assert smoothness_loss(np.full((5, 7), 0.3), 3.0) == 0.0

    def test_checkerboard(self):
        assert smoothness_loss(np.array([[1.0, 0.0], [0.0, 1.0]]), 1.0) == 4.0

    def test_single_centre_pixel(self):
        pred = np.zeros((3, 3))
        pred[1, 1] = 1.0
        assert smoothness_loss(pred, 2.0) == 8.0

    def test_homogeneity(self, rng):
        pred = rng.uniform(0.0, 0.5, size=(6, 6))
        assert smoothness_loss(2.0 * pred) == pytest.approx(2.0 * smoothness_loss(pred), rel=1e-12)

    def test_normalized_divides_by_pair_count(self, rng):
        pred = rng.uniform(size=(4, 6))
        pairs = adjacent_pair_count(pred.shape)
        assert pairs == 3 * 6 + 4 * 5
        assert smoothness_loss(pred, 1.0, normalize=True) == pytest.approx(smoothness_loss(pred) / pairs)

    def test_single_pixel_normalized(self):
        assert smoothness_loss(np.array([[0.4]]), 1.0, normalize=True) == 0.0

    def test_negative_lambda_rejected(self):
        with pytest.raises(ConfigurationError):
            smoothness_loss(np.zeros((2, 2)), -1.0)


class TestCombinedLoss:

    def test_endpoints_are_exact(self, rng, loss_cfg):
        pred = rng.uniform(size=(6, 6))
        gt = rng.integers(0, 2, size=(6, 6))
        assert combined_loss(pred, gt, 0.0, loss_cfg) == dice_ce_loss(pred, gt, loss_cfg)
        assert combined_loss(pred, gt, 1.0, loss_cfg) == smoothness_loss(pred, loss_cfg.lambda_smooth)

    def test_midpoint_is_mean(self, rng, loss_cfg):
        pred = rng.uniform(size=(6, 6))
        gt = rng.integers(0, 2, size=(6, 6))
        expected = 0.5 * (dice_ce_loss(pred, gt, loss_cfg) + smoothness_loss(pred))
        assert combined_loss(pred, gt, 0.5, loss_cfg) == pytest.approx(expected, rel=1e-12)

    def test_affine_in_t(self, rng, loss_cfg):
        pred = rng.uniform(size=(5, 5))
        gt = rng.integers(0, 2, size=(5, 5))
        a = combined_loss(pred, gt, 0.0, loss_cfg)
        b = combined_loss(pred, gt, 1.0, loss_cfg)
        for t in (0.25, 0.5, 0.75):
            assert combined_loss(pred, gt, t, loss_cfg) == pytest.approx(a + t * (b - a), rel=1e-12)

    @pytest.mark.parametrize("t", [-0.1, 1.01])
    def test_t_out_of_range(self, t, loss_cfg):
        with pytest.raises(ConfigurationError):
            combined_loss(np.zeros((2, 2)), np.zeros((2, 2)), t, loss_cfg)

    def test_components_match_individual_losses(self, rng, loss_cfg):
        pred = rng.uniform(size=(4, 4))
        gt = rng.integers(0, 2, size=(4, 4))
        dicece, smooth, combined = loss_components(pred, gt, 0.3, loss_cfg)
        assert dicece == dice_ce_loss(pred, gt, loss_cfg)
        assert smooth == smoothness_loss(pred)
        assert combined == combined_loss(pred, gt, 0.3, loss_cfg)


class TestGradients:

    def test_smooth_gradient_of_constant_map(self, loss_cfg):
        grad = loss_gradients(np.full((4, 4), 0.7), np.ones((4, 4)), 1.0, loss_cfg)
        assert np.all(grad == 0.0)

    def test_scalar_ce_gradient(self):
        cfg = LossConfig(beta=0.0)
        grad = loss_gradients(np.array([[0.5]]), np.array([[1]]), 0.0, cfg)
        assert grad[0, 0] == pytest.approx(-2.0)

    def test_ce_gradient_zero_where_clamped(self):
        grad = ce_gradient(np.array([[0.0, 0.5, 1.0]]), np.array([[1, 1, 0]]))
        assert grad[0, 0] == 0.0
        assert grad[0, 2] == 0.0
        assert grad[0, 1] != 0.0

    def test_smoothness_gradient_sign_of_zero(self):
        grad = smoothness_gradient(np.array([[0.2, 0.2, 0.6]]))
        assert grad.tolist() == [[0.0, -1.0, 1.0]]

    def test_dice_gradient_matches_difference(self, rng):
        pred = rng.uniform(0.1, 0.9, size=(3, 3))
        gt = rng.integers(0, 2, size=(3, 3))
        h = 1e-6
        plus, minus = pred.copy(), pred.copy()
        plus[1, 2] += h
        minus[1, 2] -= h
        numeric = (dice_loss(plus, gt) - dice_loss(minus, gt)) / (2 * h)
        assert dice_gradient(pred, gt)[1, 2] == pytest.approx(numeric, rel=1e-6)

    def test_blend_of_gradients(self, rng, loss_cfg):
        pred = rng.uniform(0.1, 0.9, size=(4, 4))
        gt = rng.integers(0, 2, size=(4, 4))
        t = 0.4
        expected = ((1 - t) * (0.5 * dice_gradient(pred, gt) + 0.5 * ce_gradient(pred, gt))
                    + t * smoothness_gradient(pred))
        np.testing.assert_allclose(loss_gradients(pred, gt, t, loss_cfg), expected, rtol=1e-12)

    def test_normalized_smoothness_gradient_scale(self, rng):
        pred = rng.uniform(size=(3, 4))
        pairs = adjacent_pair_count(pred.shape)
        np.testing.assert_allclose(smoothness_gradient(pred, 2.0, normalize=True),
                                   smoothness_gradient(pred, 2.0) / pairs)
