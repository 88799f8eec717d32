#!/usr/bin/env python3
"""Bar/line action-distribution panels from the analysis CSVs.

Understands the long-format quantum/classical overlay (distributions.csv),
time-resolved level populations (evolution.csv; final slice is drawn),
histogram bars (histogram.csv), and plain (n, rho_nn) diagonals
(eigdiag_*.csv, cycle_state_*.csv).  Several inputs overlay with a legend.
Inputs are checked against their run manifest before anything is drawn.
"""

import sys

import figlib

if __name__ == "__main__":
    sys.exit(figlib.script_main(figlib.DISTRIBUTIONS, __doc__, multi_input=True))
