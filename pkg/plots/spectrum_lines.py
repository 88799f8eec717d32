#!/usr/bin/env python3
"""Spectrum-vs-parameter lines from `drm spectrum ...` CSVs.

Handles both sweep products: |lambda_j| against omega (Floquet) and
Re eps_j against gamma (Liouvillian).  The three leading branches are drawn
in color, the rest as a thin grey band.  Inputs are checked against their run
manifest before anything is drawn.
"""

import sys

import figlib

if __name__ == "__main__":
    sys.exit(figlib.script_main(figlib.SPECTRUM_LINES, __doc__, multi_input=True))
