"""Tests for blended-da.

Unit tests run on small grids in seconds. Tests marked ``integration`` drive the
command line in temporary directories; tests marked ``slow`` reproduce the
full-resolution experiments and are deselected by default.
"""
