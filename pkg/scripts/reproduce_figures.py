#!/usr/bin/env python3
"""Reproduce the study's figure data and render the figures.

Each entry runs one CLI invocation into <data-dir>/<name>/ (skipped when that
directory already holds a manifest.json, so the script can be re-run after an
interruption), then the plots driver renders every recognized CSV.  The heavy
entries — the 25-point frequency sweep, the hbar=0.25 propagator build inside
`analyze compare`, and the lifetime scan — take tens of minutes each on one
core; --skip-heavy leaves them out for a quick pass.
"""

import argparse
import subprocess
import sys
import time
from pathlib import Path

from drm import cli

ROOT = Path(__file__).resolve().parents[1]

RUNS = (
    # name, config, subcommand argv, heavy
    ("phase_map_om21", "phase_map_om21.toml",
     ["classical", "map", "--grid", "32x32", "--periods", "300"], False),
    ("basins_om4", "basins_om4.toml", ["classical", "basins"], False),
    ("ensemble_om21", "ensemble_om21.toml", ["classical", "ensemble"], False),
    ("liouvillian_om4", "liouvillian_om4.toml",
     ["spectrum", "liouvillian", "--gamma", "0.01:0.15:0.01"], False),
    ("cycle_state_om3", "cycle_state_om3.toml", ["analyze", "cycle-state"], False),
    ("cycle_decay_om3", "cycle_state_om3.toml",
     ["analyze", "decay", "--periods", "400"], False),
    ("equilibration_om21", "equilibration_om21.toml", ["quantum", "evolve"], False),
    ("floquet_sweep_hb05", "floquet_sweep_hb05.toml",
     ["spectrum", "floquet", "--omega", "1.6:4.0:0.1"], True),
    ("equilibration_compare_om21", "equilibration_om21.toml",
     ["analyze", "compare"], True),
    ("lifetime_scan", "lifetime_scan.toml", ["effective", "lifetime-scan"], True),
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", type=Path, default=ROOT / "runs")
    ap.add_argument("--figures-dir", type=Path, default=ROOT / "figures")
    ap.add_argument("--only", nargs="+", metavar="NAME",
                    help=f"subset of: {', '.join(r[0] for r in RUNS)}")
    ap.add_argument("--skip-heavy", action="store_true",
                    help="skip the runs that take tens of minutes")
    ap.add_argument("--no-figures", action="store_true",
                    help="produce the CSV data only")
    args = ap.parse_args(argv)

    selected = [r for r in RUNS if not args.only or r[0] in args.only]
    if args.skip_heavy:
        selected = [r for r in selected if not r[3]]
    if not selected:
        print("nothing selected", file=sys.stderr)
        return 2
    for name, config, extra, _ in selected:
        out = args.data_dir / name
        if (out / "manifest.json").exists():
            print(f"{name}: already present, skipping")
            continue
        t0 = time.perf_counter()
        rc = cli.dispatch(["--config", str(ROOT / "configs" / config),
                           "--out-dir", str(out)] + extra)
        print(f"{name}: exit {rc} after {time.perf_counter() - t0:.1f}s")
        if rc != 0:
            return rc
    if args.no_figures:
        return 0
    return subprocess.call(
        [sys.executable, str(ROOT / "plots" / "make_all_figures.py"),
         "--data-dir", str(args.data_dir), "--out-dir", str(args.figures_dir)])


if __name__ == "__main__":
    sys.exit(main())
