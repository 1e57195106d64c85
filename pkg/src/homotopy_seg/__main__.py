#!/usr/bin/env python3
"""
Main entry point for homotopy-seg when run as a module.

This allows the package to be run with: python -m homotopy_seg
"""

import sys

from .cli.main import main

if __name__ == "__main__":
    sys.exit(main())
