"""
Test package for homotopy-seg.

This package contains all tests for the library and CLI.
"""
