"""
Error hierarchy for homotopy-seg.

Library code raises these; the command-line front-end maps them to
process exit codes.
"""

from typing import Dict, Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class HomotopySegError(Exception):
    """Base class for all package errors."""

    exit_code = EXIT_USAGE


class ShapeError(HomotopySegError, ValueError):
    """Array dimensions or channel counts do not match."""


class ConfigurationError(HomotopySegError, ValueError):
    """A parameter value lies outside its valid range."""


class UsageError(HomotopySegError, ValueError):
    """An operation was called with invalid inputs or out of sequence."""


class CheckpointError(HomotopySegError, OSError):
    """A checkpoint or run artifact is missing or malformed."""

    exit_code = EXIT_IO


class NumericalAbortError(HomotopySegError, ArithmeticError):
    """A loss or gradient became nonfinite.

    Attributes:
        step: Training step at which the abort happened, if known
        components: Loss components or diagnostic values at the abort
        block: Name of the offending parameter block, if any
    """

    exit_code = EXIT_NUMERICAL

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        components: Optional[Dict[str, float]] = None,
        block: Optional[str] = None,
    ):
        super().__init__(message)
        self.step = step
        self.components = dict(components or {})
        self.block = block


class GradientCheckError(NumericalAbortError):
    """Analytic gradients disagree with finite differences."""


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code."""
    if isinstance(error, HomotopySegError):
        return error.exit_code
    if isinstance(error, OSError):
        return EXIT_IO
    return EXIT_USAGE
