#!/usr/bin/env python3
"""
Main entry point for homotopy-seg.

Runs the command-line interface from a source checkout, equivalent to the
installed `homotopy-seg` script.
"""

import sys
from pathlib import Path

# Add the src directory to the Python path
src_path = Path(__file__).parent / "src"
sys.path.insert(0, str(src_path))

from homotopy_seg.cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
