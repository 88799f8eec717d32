#!/usr/bin/env python3
"""Stroboscopic phase-portrait scatter from `drm classical map` CSVs.

Each input is a (theta, I) point list; several inputs overlay with a legend.
Inputs are checked against their run manifest before anything is drawn.
"""

import sys

import figlib

if __name__ == "__main__":
    sys.exit(figlib.script_main(figlib.SCATTER_MAP, __doc__, multi_input=True))
