"""
Utility modules for homotopy-seg.

This package contains configuration management, logging setup and the
error hierarchy used throughout the library.
"""

from .config import Config
from .logger import setup_logger
from .exceptions import (
    HomotopySegError,
    ShapeError,
    ConfigurationError,
    UsageError,
    CheckpointError,
    NumericalAbortError,
    GradientCheckError,
)

__all__ = [
    "Config",
    "setup_logger",
    "HomotopySegError",
    "ShapeError",
    "ConfigurationError",
    "UsageError",
    "CheckpointError",
    "NumericalAbortError",
    "GradientCheckError",
]
