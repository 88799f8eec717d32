#!/usr/bin/env python3
"""Attractor-basin raster from a `drm classical basins` CSV.

Expects the (theta0, I0, label) grid census; draws one fixed color per
attractor kind plus grey for unresolved points.  The input is checked against
its run manifest before anything is drawn.
"""

import sys

import figlib

if __name__ == "__main__":
    sys.exit(figlib.script_main(figlib.BASIN_RASTER, __doc__))
