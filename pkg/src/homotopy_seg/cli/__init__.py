"""
Command-line interface for homotopy-seg.

Subcommands: gen-data, train, eval, gradcheck, compare and report.
"""

from .main import main, build_parser

__all__ = [
    "main",
    "build_parser",
]
