#!/usr/bin/env python3
"""Render every recognized figure from a tree of simulation run directories.

Walks --data-dir for directories holding a manifest.json, maps each known CSV
product to its figure script, and renders each figure in its own subprocess
(the scripts stay independently usable, and a crash in one figure cannot take
down the rest).  Attempts everything, then exits nonzero if anything failed.

Usually invoked as `make all-figures` with DATA=<tree> FIGS=<out dir>.
"""

import argparse
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent

# CSV product (glob within a run directory) -> figure script
PRODUCTS = (
    ("map.csv", "scatter_map.py"),
    ("basins.csv", "basin_raster.py"),
    ("floquet_spectrum.csv", "spectrum_lines.py"),
    ("liouvillian_spectrum.csv", "spectrum_lines.py"),
    ("lifetimes.csv", "spectrum_lines.py"),
    ("decay.csv", "spectrum_lines.py"),
    ("histogram.csv", "distribution_panels.py"),
    ("distributions.csv", "distribution_panels.py"),
    ("evolution.csv", "distribution_panels.py"),
    ("eigdiag_*.csv", "distribution_panels.py"),
    ("cycle_state_*.csv", "distribution_panels.py"),
)


def plan(data_dir: Path, out_dir: Path):
    jobs = []
    for manifest in sorted(data_dir.rglob("manifest.json")):
        run_dir = manifest.parent
        tag = "_".join(run_dir.relative_to(data_dir).parts) or run_dir.name
        for pattern, script in PRODUCTS:
            for csv_path in sorted(run_dir.glob(pattern)):
                image = out_dir / f"{tag}__{csv_path.stem}.png"
                jobs.append((script, csv_path, image))
    return jobs


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", required=True, type=Path,
                    help="tree of run directories (each with manifest.json)")
    ap.add_argument("--out-dir", required=True, type=Path)
    args = ap.parse_args(argv)
    if not args.data_dir.is_dir():
        print(f"error: data dir not found: {args.data_dir}", file=sys.stderr)
        return 1
    jobs = plan(args.data_dir, args.out_dir)
    if not jobs:
        print(f"error: no manifest.json under {args.data_dir}", file=sys.stderr)
        return 1
    failures = 0
    for script, csv_path, image in jobs:
        proc = subprocess.run(
            [sys.executable, str(HERE / script),
             "--input", str(csv_path), "--output", str(image)],
            capture_output=True, text=True)
        status = "ok" if proc.returncode == 0 else f"FAILED ({proc.returncode})"
        print(f"{csv_path} -> {image}: {status}")
        if proc.returncode != 0:
            failures += 1
            sys.stderr.write(proc.stderr)
    print(f"{len(jobs) - failures}/{len(jobs)} figures rendered")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
