"""
Tests for text report rendering.
"""

import pytest

from homotopy_seg.cli.report import (
    NOT_AVAILABLE,
    TABLE_HEADER,
    format_smoothness_table,
    format_table,
    row_summary,
)
from homotopy_seg.data.models import MetricsReport
from homotopy_seg.utils.exceptions import UsageError


@pytest.fixture
def best_row():
    return MetricsReport(accuracy=0.9, jaccard=0.67, dice=0.8, roc_auc=0.91, eer=0.17,
                         eer_threshold=0.74, tp=10, tn=10, fp=1, fn=1)


@pytest.fixture
def baseline_row():
    return MetricsReport(accuracy=0.876, jaccard=0.6049, dice=0.754, roc_auc=0.8849, eer=0.2051,
                         eer_threshold=0.6649, tp=9, tn=10, fp=2, fn=1)


class TestRowSummary:

    def test_fixture_row(self, best_row):
        assert row_summary(best_row) == "0.90 / 0.67 / 0.80 / 0.91 / 0.17 / 0.74"

    def test_rounding(self, baseline_row):
        assert row_summary(baseline_row) == "0.88 / 0.60 / 0.75 / 0.88 / 0.21 / 0.66"


class TestFormatTable:

    def test_layout(self, best_row, baseline_row):
        text = format_table(["Single", "Multi"], [baseline_row, best_row])
        lines = text.splitlines()
        assert text.endswith("\n")
        assert len(lines) == 4
        assert lines[0].split("  ")[0].strip() == "Model Name"
        for column in TABLE_HEADER[1:]:
            assert column in lines[0]
        assert set(lines[1].replace(" ", "")) == {"-"}
        assert lines[3].startswith("Multi")
        assert lines[3].split()[1:] == ["0.90", "0.67", "0.80", "0.91", "0.17", "0.74"]

    def test_columns_aligned(self, best_row):
        lines = format_table(["A much longer model name", "B"], [best_row, best_row]).splitlines()
        assert len({len(line) for line in lines}) == 1

    def test_name_count_mismatch(self, best_row):
        with pytest.raises(UsageError):
            format_table(["A", "B"], [best_row])

    def test_nothing_to_report(self):
        with pytest.raises(UsageError):
            format_table([], [])

    def test_undefined_roc_metrics_render_as_not_available(self):
        single_class = MetricsReport(accuracy=1.0, jaccard=1.0, dice=1.0, roc_auc=None, eer=None,
                                     eer_threshold=None, tp=0, tn=16, fp=0, fn=0, single_class=True)
        lines = format_table(["all soil"], [single_class]).splitlines()
        assert lines[2].split()[-3:] == [NOT_AVAILABLE] * 3
        assert row_summary(single_class) == "1.00 / 1.00 / 1.00 / n/a / n/a / n/a"

    def test_round_trip_through_dict(self, best_row):
        restored = MetricsReport.from_dict({**best_row.to_dict(), "model_name": "ignored"})
        assert format_table(["m"], [restored]) == format_table(["m"], [best_row])


class TestSmoothnessTable:

    def test_values(self):
        text = format_smoothness_table(["m"], [{"mean": 0.01234, "median": 0.01, "max": 0.5}])
        assert text.splitlines()[2].split()[1:] == ["0.0123", "0.0100", "0.5000"]

    def test_mismatch(self):
        with pytest.raises(UsageError):
            format_smoothness_table(["a", "b"], [{"mean": 0.0, "median": 0.0, "max": 0.0}])
