"""
Tests for finite-difference gradient verification.
"""

import numpy as np
import pytest

from homotopy_seg.core.gradcheck import (
    LOSS_BLOCKS,
    BlockResult,
    GradcheckReport,
    central_difference,
    check_loss_gradients,
    check_model_gradients,
    near_clamp,
    near_kink,
    relative_error,
    run_gradcheck,
)
from homotopy_seg.core.model import PARAMETER_BLOCKS
from homotopy_seg.data.models import GradcheckConfig
from homotopy_seg.utils.exceptions import EXIT_NUMERICAL, ConfigurationError, GradientCheckError


@pytest.fixture
def small_check():
    return GradcheckConfig(instances=4, sizes=((4, 4), (3, 5)), seed=2, c_hidden=3)


class TestHelpers:

    def test_relative_error(self):
        assert relative_error(1.0, 1.0) == 0.0
        assert relative_error(2.0, 1.0) == pytest.approx(0.5)
        assert relative_error(0.0, 0.0) == 0.0
        assert relative_error(1e-9, 0.0, scale=1e-3) == pytest.approx(1e-6)

    def test_central_difference_of_quadratic(self):
        values = np.array([[1.0, 2.0]])
        numeric = central_difference(lambda v: float(np.sum(v ** 2)), values, (0, 1), 1e-4)
        assert numeric == pytest.approx(4.0, rel=1e-9)
        assert values.tolist() == [[1.0, 2.0]]

    def test_near_kink(self):
        pred = np.array([[0.2, 0.2, 0.7], [0.4, 0.9, 0.1]])
        assert near_kink(pred, 1e-5).tolist() == [[True, True, False], [False, False, False]]

    def test_near_clamp(self):
        assert near_clamp(np.array([[0.0, 0.5, 1.0]]), 1e-7, 1e-5).tolist() == [[True, False, True]]


class TestBlockResults:

    def test_block_needs_checked_components(self):
        block = BlockResult("dice", (4, 4), 1e-4)
        assert not block.passed
        block.record(1e-6)
        assert block.passed
        block.record(1e-3)
        assert not block.passed
        assert block.label == "dice@4x4"

    def test_report_raises_with_failed_blocks(self):
        good = BlockResult("dice", (4, 4), 1e-4, checked=3, max_rel_error=1e-8)
        bad = BlockResult("conv1_weights", (8, 8), 1e-3, checked=3, max_rel_error=0.3)
        report = GradcheckReport([good, bad])
        assert not report.passed
        with pytest.raises(GradientCheckError) as excinfo:
            report.raise_on_failure()
        assert excinfo.value.block == "conv1_weights@8x8"
        assert excinfo.value.exit_code == EXIT_NUMERICAL
        assert excinfo.value.components == {"conv1_weights@8x8": 0.3}

    def test_to_dict(self):
        report = GradcheckReport([BlockResult("ce", (2, 2), 1e-4, checked=4, skipped=1)])
        data = report.to_dict()
        assert data["passed"] is True
        assert data["blocks"][0]["block"] == "ce@2x2"
        assert data["blocks"][0]["skipped"] == 1


class TestLossGradients:

    def test_all_loss_blocks_pass(self, small_check):
        results = check_loss_gradients(small_check)
        assert [r.name for r in results] == list(LOSS_BLOCKS) * 2
        for result in results:
            assert result.passed, result.to_dict()
            assert result.checked + result.skipped == small_check.instances * result.size[0] * result.size[1]

    def test_seeded(self, small_check):
        first = [r.to_dict() for r in check_loss_gradients(small_check)]
        second = [r.to_dict() for r in check_loss_gradients(small_check)]
        assert first == second


class TestModelGradients:

    def test_all_parameter_blocks_pass(self, small_check):
        results = check_model_gradients(small_check)
        assert [r.name for r in results] == list(PARAMETER_BLOCKS) * 2
        for result in results:
            assert result.passed, result.to_dict()

    def test_perturbed_gradient_detected(self, small_check):
        results = check_model_gradients(small_check, perturb_weights=1.5)
        failed = {r.name for r in results if not r.passed}
        assert failed == {"conv1_weights"}


class TestRunGradcheck:

    def test_report(self, small_check):
        report = run_gradcheck(small_check)
        assert report.passed
        assert len(report.blocks) == 2 * (len(LOSS_BLOCKS) + len(PARAMETER_BLOCKS))
        assert all(line.endswith("ok") for line in report.summary_lines())

    def test_perturbed_run_raises(self, small_check):
        with pytest.raises(GradientCheckError):
            run_gradcheck(small_check, perturb_weights=1.5).raise_on_failure()

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            GradcheckConfig(instances=0)
