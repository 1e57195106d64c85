"""
Text reports for homotopy-seg.

Renders MetricsReport rows as an aligned table with the columns
Model Name, Accuracy, Jaccard, Dice, ROC AUC, EER and EER Threshold, and
prediction smoothness statistics as a companion table.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence

from ..data.models import MetricsReport
from ..utils.exceptions import UsageError

logger = logging.getLogger(__name__)

TABLE_HEADER = ["Model Name", "Accuracy", "Jaccard", "Dice", "ROC AUC", "EER", "EER Threshold"]
SMOOTHNESS_HEADER = ["Model Name", "Smoothness Mean", "Smoothness Median", "Smoothness Max"]
SMOOTHNESS_KEYS = ("mean", "median", "max")
NOT_AVAILABLE = "n/a"


def format_value(value: Optional[float]) -> str:
    """Two decimals; "n/a" for metrics undefined on the evaluated labels."""
    if value is None:
        return NOT_AVAILABLE
    return f"{value:.2f}"


def row_values(report: MetricsReport) -> List[str]:
    """The six metric columns of one report, two decimals each."""
    return [format_value(v) for v in report.table_values()]


def row_summary(report: MetricsReport) -> str:
    """Metric columns joined as "0.90 / 0.67 / ..."."""
    return " / ".join(row_values(report))


def _render(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(header[i]), *(len(row[i]) for row in rows)) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                       for i, (cell, w) in enumerate(zip(header, widths)))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.ljust(w) if i == 0 else cell.rjust(w)
                               for i, (cell, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"


def format_table(names: Sequence[str], reports: Sequence[MetricsReport]) -> str:
    """Aligned metrics table, one row per model.

    Args:
        names: Model names, one per report
        reports: Metrics of each model

    Returns:
        Table text ending in a newline
    """
    if len(names) != len(reports):
        raise UsageError(f"{len(names)} names for {len(reports)} reports")
    if not reports:
        raise UsageError("nothing to report")
    rows = [[name] + row_values(report) for name, report in zip(names, reports)]
    return _render(TABLE_HEADER, rows)


def format_smoothness_table(names: Sequence[str], stats: Sequence[Dict[str, Any]]) -> str:
    """Aligned table of per-model prediction smoothness statistics."""
    if len(names) != len(stats):
        raise UsageError(f"{len(names)} names for {len(stats)} smoothness entries")
    rows = [[name] + [f"{float(s[key]):.4f}" for key in SMOOTHNESS_KEYS] for name, s in zip(names, stats)]
    return _render(SMOOTHNESS_HEADER, rows)


__all__ = [
    "TABLE_HEADER",
    "SMOOTHNESS_HEADER",
    "NOT_AVAILABLE",
    "format_value",
    "row_values",
    "row_summary",
    "format_table",
    "format_smoothness_table",
]
