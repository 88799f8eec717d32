"""Shared plumbing for the figure scripts.

The simulation CLI writes one directory per invocation: CSV files whose first
two lines are `# produced-by: ...` and `# config-digest: ...` comments, plus a
manifest.json recording the config digest and the sha256 of every output.
Everything here consumes only that documented surface.

A figure is described by a FigureRecipe and drawn by render(), which
  * refuses inputs that are missing, empty, undeclared in the manifest,
    byte-tampered, or stamped with a different config digest,
  * renders deterministically (Agg backend, fixed dpi) so re-running on
    identical inputs reproduces the image byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.patches as mpatches  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SCATTER_MAP = "scatter map"
BASIN_RASTER = "basin raster"
SPECTRUM_LINES = "spectrum lines"
DISTRIBUTIONS = "distributions"
KINDS = (SCATTER_MAP, BASIN_RASTER, SPECTRUM_LINES, DISTRIBUTIONS)

DPI = 150

# fixed basin palette: four attractors plus a grey for unresolved points
BASIN_COLORS = {
    "Unresolved": "#b0b0b0",
    "UpperCycle": "#d7301f",
    "LowerCycle": "#0570b0",
    "FixedPoint0": "#fdcc8a",
    "FixedPointPi": "#74c476",
}


class InputError(RuntimeError):
    """Missing, empty, undeclared, or digest-mismatched input file."""


@dataclass(frozen=True)
class FigureRecipe:
    inputs: tuple[Path, ...]
    kind: str
    output: Path
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    manifest: Path | None = None  # default: manifest.json beside each input

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind '{self.kind}'; expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("recipe needs at least one input file")


@dataclass(frozen=True)
class Table:
    path: Path
    comments: tuple[str, ...]
    names: tuple[str, ...]
    columns: dict

    @property
    def config_digest(self) -> str | None:
        for line in self.comments:
            if line.startswith("# config-digest:"):
                return line.split(":", 1)[1].strip()
        return None

    def floats(self, name: str) -> np.ndarray:
        try:
            return np.array([float(v) for v in self.columns[name]])
        except ValueError as exc:
            raise InputError(f"non-numeric value in column '{name}' of {self.path.name}: {exc}")

    def strings(self, name: str) -> list:
        return self.columns[name]


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def load_table(path: Path) -> Table:
    path = Path(path)
    if not path.exists():
        raise InputError(f"input not found: {path}")
    comments = []
    with open(path, newline="") as fh:
        pos = fh.tell()
        while True:
            line = fh.readline()
            if line.startswith("#"):
                comments.append(line.rstrip("\n"))
                pos = fh.tell()
            else:
                fh.seek(pos)
                break
        reader = csv.DictReader(fh)
        names = tuple(reader.fieldnames or ())
        columns = {n: [] for n in names}
        for row in reader:
            for n in names:
                columns[n].append(row[n])
    if not names:
        raise InputError(f"{path.name} has no header row; refusing to render")
    if not next(iter(columns.values()), []):
        raise InputError(f"{path.name} has no data rows; refusing to render")
    return Table(path, tuple(comments), names, columns)


def verify_against_manifest(path: Path, manifest_path: Path | None = None) -> None:
    """Refuse inputs whose bytes or config digest disagree with the manifest."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"input not found: {path}")
    mpath = Path(manifest_path) if manifest_path else path.parent / "manifest.json"
    if not mpath.exists():
        raise InputError(f"no manifest for {path.name}: {mpath} not found")
    try:
        manifest = json.loads(mpath.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest {mpath} is not valid JSON: {exc}")
    declared = {entry["path"]: entry for entry in manifest.get("outputs", [])}
    if path.name not in declared:
        raise InputError(f"{path.name} is not declared in {mpath}")
    actual = _sha256(path)
    recorded = declared[path.name].get("sha256", "")
    if actual != recorded:
        raise InputError(
            f"digest mismatch for {path}: sha256 {actual[:12]}... but manifest "
            f"records {recorded[:12]}...; refusing stale or edited input")
    stamp = load_table(path).config_digest if path.suffix == ".csv" else None
    expected = manifest.get("config_digest")
    if stamp is not None and expected is not None and stamp != expected:
        raise InputError(
            f"config-digest mismatch for {path.name}: header says {stamp}, "
            f"manifest says {expected}; input comes from a different run")


# ---------------------------------------------------------------------------
# renderers, one per figure kind


def _render_scatter_map(ax, tables):
    for t in tables:
        x, y = t.floats(t.names[0]), t.floats(t.names[1])
        ax.plot(x, y, ".", ms=2.0, mew=0, alpha=0.7,
                label=t.path.stem if len(tables) > 1 else None)
    return t.names[0], t.names[1]


def _render_basin_raster(ax, tables):
    t = tables[0]
    x, y = t.floats(t.names[0]), t.floats(t.names[1])
    labels = t.strings(t.names[2])
    xs, ys = np.unique(x), np.unique(y)
    present = [k for k in BASIN_COLORS if k in set(labels)]
    present += sorted(set(labels) - set(BASIN_COLORS))  # future-proof: grey extras
    code = {k: i for i, k in enumerate(present)}
    grid = np.full((ys.size, xs.size), -1, dtype=int)
    ix = np.searchsorted(xs, x)
    iy = np.searchsorted(ys, y)
    grid[iy, ix] = [code[k] for k in labels]
    if np.any(grid < 0):
        raise InputError(f"{t.path.name} is not a complete raster grid")
    dx = xs[1] - xs[0] if xs.size > 1 else 1.0
    dy = ys[1] - ys[0] if ys.size > 1 else 1.0
    cmap = matplotlib.colors.ListedColormap(
        [BASIN_COLORS.get(k, "#808080") for k in present])
    ax.imshow(grid, origin="lower", aspect="auto", cmap=cmap,
              vmin=-0.5, vmax=len(present) - 0.5, interpolation="nearest",
              extent=(xs[0] - dx / 2, xs[-1] + dx / 2,
                      ys[0] - dy / 2, ys[-1] + dy / 2))
    ax.legend(handles=[mpatches.Patch(color=BASIN_COLORS.get(k, "#808080"), label=k)
                       for k in present],
              loc="upper right", fontsize=7, framealpha=0.9)
    return t.names[0], t.names[1]


def _render_spectrum_lines(ax, tables):
    for t in tables:
        sweep = t.names[0]
        value = ("abs_lambda" if "abs_lambda" in t.names
                 else "re_eps" if "re_eps" in t.names else t.names[-1])
        x, v = t.floats(sweep), t.floats(value)
        branches = t.floats("j").astype(int) if "j" in t.names else np.zeros(x.size, int)
        for b in np.unique(branches):
            sel = branches == b
            order = np.argsort(x[sel], kind="stable")
            if b < 3:
                ax.plot(x[sel][order], v[sel][order], lw=1.4,
                        color=f"C{b}", label=f"{value}, j={b}")
            else:
                ax.plot(x[sel][order], v[sel][order], lw=0.5,
                        color="0.6", alpha=0.5, zorder=1)
    ax.legend(loc="best", fontsize=8)
    return sweep, value


def _render_distributions(ax, tables):
    xname, yname = "", ""
    for t in tables:
        stem = t.path.stem
        if "source" in t.names:
            xname, yname = t.names[0], "weight"
            x, w = t.floats(xname), t.floats(yname)
            groups = t.strings("source")
            for g in sorted(set(groups)):
                sel = np.array([v == g for v in groups])
                if g == "classical":
                    width = 0.8 * np.median(np.diff(np.unique(x[sel])))
                    ax.bar(x[sel], w[sel], width=width, alpha=0.45,
                           color="0.45", label=g)
                else:
                    ax.plot(x[sel], w[sel], "o-", ms=3, lw=1.2, label=g)
        elif "t" in t.names and len(t.names) >= 3:
            # time-resolved populations: show the final slice
            xname, yname = t.names[1], t.names[2]
            times = t.floats("t")
            sel = times == times.max()
            ax.plot(t.floats(xname)[sel], t.floats(yname)[sel], "-", lw=1.2,
                    label=f"{stem}, t={times.max():g}")
        else:
            xname, yname = t.names[0], t.names[1]
            x, w = t.floats(xname), t.floats(yname)
            if "bin" in xname:
                width = 0.8 * np.median(np.diff(np.unique(x)))
                ax.bar(x, w, width=width, alpha=0.45, color="0.45", label=stem)
            else:
                ax.plot(x, w, "-", lw=1.2,
                        label=stem if len(tables) > 1 else None)
    return xname, yname


_RENDERERS = {
    SCATTER_MAP: _render_scatter_map,
    BASIN_RASTER: _render_basin_raster,
    SPECTRUM_LINES: _render_spectrum_lines,
    DISTRIBUTIONS: _render_distributions,
}


def render(recipe: FigureRecipe) -> Path:
    """Verify every input, draw the figure, write the image; returns its path."""
    tables = []
    for p in recipe.inputs:
        verify_against_manifest(p, recipe.manifest)
        tables.append(load_table(p))
    fig, ax = plt.subplots(figsize=(6.0, 4.2), dpi=DPI)
    try:
        xname, yname = _RENDERERS[recipe.kind](ax, tables)
        ax.set_xlabel(recipe.xlabel or xname)
        ax.set_ylabel(recipe.ylabel or yname)
        if recipe.title:
            ax.set_title(recipe.title)
        if recipe.xlim:
            ax.set_xlim(recipe.xlim)
        if recipe.ylim:
            ax.set_ylim(recipe.ylim)
        handles, _ = ax.get_legend_handles_labels()
        if not handles and ax.get_legend():
            ax.get_legend().remove()
        fig.tight_layout()
        recipe.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(recipe.output)
    finally:
        plt.close(fig)
    return recipe.output


# ---------------------------------------------------------------------------
# shared command line for the standalone scripts


def script_main(kind: str, description: str, argv=None, multi_input=False) -> int:
    import argparse
    import sys

    ap = argparse.ArgumentParser(description=description)
    if multi_input:
        ap.add_argument("--input", required=True, type=Path, nargs="+")
    else:
        ap.add_argument("--input", required=True, type=Path)
    ap.add_argument("--output", required=True, type=Path)
    ap.add_argument("--manifest", type=Path, default=None,
                    help="manifest.json (default: next to each input)")
    ap.add_argument("--title", default="")
    ap.add_argument("--xlabel", default="")
    ap.add_argument("--ylabel", default="")
    ap.add_argument("--xlim", type=float, nargs=2, default=None)
    ap.add_argument("--ylim", type=float, nargs=2, default=None)
    args = ap.parse_args(argv)
    inputs = tuple(args.input) if multi_input else (args.input,)
    recipe = FigureRecipe(
        inputs=inputs, kind=kind, output=args.output, title=args.title,
        xlabel=args.xlabel, ylabel=args.ylabel,
        xlim=tuple(args.xlim) if args.xlim else None,
        ylim=tuple(args.ylim) if args.ylim else None,
        manifest=args.manifest)
    try:
        out = render(recipe)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0
