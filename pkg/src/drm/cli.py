"""Command-line entry point: subcommands, sweeps, CSV/JSON outputs, manifest.

Exit codes: 0 success, 2 usage error, 3 configuration error, 4 module error.
Every CSV starts with comment lines naming the producing subcommand and the
config digest; identical config + seed reproduce byte-identical CSVs.  Each
invocation writes manifest.json with versions, timing, and output digests.
The default output directory is --out-dir, else [run] out_dir, else the
DRM_OUT_DIR environment variable, else ./drm_out.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import analysis, classical, effective, quantum, superop
from .model import ConfigError, ModelParams, RunConfig, derive_geometry, load_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MODULE = 4

_DEF_HBAR_SCAN = "0.5,0.4,0.3333333333333333,0.25,0.2"


# ---------------------------------------------------------------------------
# small plumbing helpers


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, subcommand: str, digest: str, header: list[str],
               rows) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(f"# produced-by: drm {subcommand}\n")
        fh.write(f"# config-digest: {digest}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
    return path


def _write_json(path: Path, payload: dict) -> Path:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _parse_sweep(text: str) -> list[float]:
    """'a:b:step' (inclusive), 'x,y,z', or a single number."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"sweep must be start:stop:step, got '{text}'")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"bad sweep bounds '{text}'")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + k * step for k in range(n)]
    return [float(p) for p in text.split(",") if p.strip()]


def _versions() -> dict:
    import numba
    import scipy
    try:
        from importlib.metadata import version
        own = version("drm")
    except Exception:
        own = "unknown"
    return {"drm": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__}


class _Run:
    """Per-invocation context: config, output dir, manifest bookkeeping."""

    def __init__(self, args):
        self.args = args
        if args.config:
            self.cfg = load_config(args.config)
            self.config_text = Path(args.config).read_text()
        else:
            self.cfg = RunConfig(params=ModelParams())
            self.config_text = "<defaults>"
        self.digest = hashlib.sha256(self.config_text.encode()).hexdigest()[:12]
        out = (args.out_dir or self.cfg.run.out_dir
               or os.environ.get("DRM_OUT_DIR") or "drm_out")
        self.out_dir = Path(out)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if args.seed is not None:
            self.cfg.run.seed = args.seed
        if args.workers is not None:
            self.cfg.run.workers = args.workers
        self.outputs: list[Path] = []
        self.t0 = time.perf_counter()

    @property
    def params(self) -> ModelParams:
        return self.cfg.params

    def with_params(self, **kw) -> ModelParams:
        d = asdict(self.params)
        d.update(kw)
        return ModelParams(**d)

    def csv(self, name: str, subcommand: str, header: list[str], rows) -> Path:
        path = _write_csv(self.out_dir / name, subcommand, self.digest, header, rows)
        self.outputs.append(path)
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = _write_json(self.out_dir / name, payload)
        self.outputs.append(path)
        return path

    def text(self, name: str, content: str) -> Path:
        path = self.out_dir / name
        path.write_text(content)
        self.outputs.append(path)
        return path

    def finish(self, subcommand: str) -> None:
        manifest = {
            "subcommand": subcommand,
            "argv": sys.argv[1:] if self.args.argv is None else self.args.argv,
            "config_digest": self.digest,
            "config": self.config_text,
            "params": asdict(self.params),
            "seed": self.cfg.run.seed,
            "workers": self.cfg.run.workers,
            "versions": _versions(),
            "elapsed_seconds": round(time.perf_counter() - self.t0, 3),
            "outputs": [{"path": p.name, "bytes": p.stat().st_size,
                         "sha256": _sha256(p)} for p in self.outputs],
        }
        _write_json(self.out_dir / "manifest.json", manifest)


# ---------------------------------------------------------------------------
# classical subcommands


def cmd_classical_map(run: _Run) -> None:
    p = run.params
    cset = run.cfg.classical
    rows = []
    if run.args.initial:
        th0, i0 = (float(x) for x in run.args.initial.split(","))
        initials = [(th0, i0)]
    else:
        nth, ni = (int(x) for x in run.args.grid.split("x"))
        lim = 2.0 * p.omega / p.g
        initials = [(th, i) for i in np.linspace(-lim, lim, ni)
                    for th in np.linspace(0.0, 2.0 * np.pi, nth, endpoint=False)]
    periods = run.args.periods or cset.t_final_periods
    for th0, i0 in initials:
        orbit = classical.stroboscopic_map((th0, i0), periods, p,
                                           cset.steps_per_period)
        rows.extend((row[0], row[1]) for row in orbit)
    run.csv("map.csv", "classical map", ["theta", "I"], rows)


def cmd_classical_basins(run: _Run) -> None:
    cset = run.cfg.classical
    th0, i0, kinds = classical.basin_census(
        run.params, grid_theta=cset.grid_theta, grid_action=cset.grid_action,
        horizon=cset.horizon_periods, tol=cset.tol,
        steps_per_period=cset.steps_per_period, workers=run.cfg.run.workers)
    run.csv("basins.csv", "classical basins", ["theta0", "I0", "label"],
            zip(th0, i0, kinds))


def cmd_classical_ensemble(run: _Run) -> None:
    p = run.params
    cset = run.cfg.classical
    ens = classical.resonance_ensemble(p, cset.n_particles, seed=run.cfg.run.seed)
    final = classical.propagate_ensemble(ens, cset.t_final_periods * p.period,
                                         p, cset.steps_per_period)
    lim = 2.0 * p.omega / p.g
    edges = np.linspace(-lim, lim, cset.bins + 1)
    centers, mass = classical.action_histogram(final, edges)
    run.csv("histogram.csv", "classical ensemble", ["I_bin_center", "weight"],
            zip(centers, mass))


# ---------------------------------------------------------------------------
# quantum subcommand


def _initial_level(run: _Run) -> int:
    if run.args.initial_level is not None:
        return run.args.initial_level
    return int(round(run.params.omega / (run.params.g * run.params.hbar)))


def _level_state(basis: quantum.MomentumBasis, level: int) -> np.ndarray:
    rho = np.zeros((basis.size, basis.size), dtype=complex)
    rho[basis.n_max + level, basis.n_max + level] = 1.0
    return rho


def cmd_quantum_evolve(run: _Run) -> None:
    p = run.params
    qset = run.cfg.quantum
    basis = quantum.MomentumBasis(qset.n_max or quantum.default_n_max(p))
    n0 = _initial_level(run)
    if abs(n0) > basis.n_max:
        raise ValueError(f"initial level {n0} outside basis (n_max={basis.n_max})")
    traj = quantum.evolve(_level_state(basis, n0),
                          (0.0, qset.t_final_periods * p.period), p,
                          steps_per_period=qset.steps_per_period,
                          sample_every_periods=qset.sample_every_periods)
    rows = []
    for t, rho in zip(traj.times, traj.states):
        for n, pop in zip(basis.levels, np.real(np.diag(rho))):
            rows.append((t, n, pop))
    run.csv("evolution.csv", "quantum evolve", ["t", "n", "rho_nn"], rows)
    if qset.snapshots or run.args.snapshots:
        for k, (t, rho) in enumerate(zip(traj.times, traj.states)):
            lines = [f"# produced-by: drm quantum evolve",
                     f"# config-digest: {run.digest}",
                     f"# snapshot t={_fmt(float(t))}  (row, col, re, im)"]
            for i in range(basis.size):
                for j in range(basis.size):
                    lines.append(f"{i} {j} {_fmt(rho[i, j].real)} {_fmt(rho[i, j].imag)}")
            run.text(f"snapshot_{k:04d}.txt", "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# spectrum subcommands


def _floquet_point(args):
    params, n_max, steps, top_k = args
    basis = quantum.MomentumBasis(n_max)
    op = superop.floquet_operator(basis, params, steps_per_period=steps,
                                  rep=superop.HERM)
    dec = superop.diagonalize(op, values_only=True, destroy=True)
    return dec.eigenvalues[:top_k]


def cmd_spectrum_floquet(run: _Run) -> None:
    p = run.params
    omegas = _parse_sweep(run.args.omega) if run.args.omega else [p.omega]
    top_k = run.cfg.run.top_k
    n_dump = run.args.dump_eigenmatrices
    workers = run.cfg.run.workers
    if n_dump:
        # single sequential pass so eigenvectors are computed exactly once
        results = []
        for om in omegas:
            pp = run.with_params(omega=om)
            basis = quantum.MomentumBasis(run.cfg.quantum.n_max
                                          or quantum.default_n_max(pp))
            op = superop.floquet_operator(
                basis, pp, rep=superop.HERM,
                steps_per_period=run.cfg.quantum.steps_per_period)
            dec = superop.diagonalize(op, n_matrices=n_dump, destroy=True)
            results.append(dec.eigenvalues[:top_k])
            _dump_eigenmatrices(run, f"omega{om:g}", basis, dec, n_dump)
    else:
        jobs = []
        for om in omegas:
            pp = run.with_params(omega=om)
            n_max = run.cfg.quantum.n_max or quantum.default_n_max(pp)
            jobs.append((pp, n_max, run.cfg.quantum.steps_per_period, top_k))
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_floquet_point, jobs))
        else:
            results = [_floquet_point(j) for j in jobs]
    rows = []
    for om, eigs in zip(omegas, results):
        for j, lam in enumerate(eigs):
            rows.append((om, j, lam.real, lam.imag, abs(lam)))
    run.csv("floquet_spectrum.csv", "spectrum floquet",
            ["omega", "j", "re_lambda", "im_lambda", "abs_lambda"], rows)


def _dump_eigenmatrices(run: _Run, tag: str, basis, dec, count: int) -> None:
    for j in range(min(count, len(dec.eigenmatrices))):
        m = dec.eigenmatrices[j]
        lines = ["# produced-by: drm spectrum floquet",
                 f"# config-digest: {run.digest}",
                 f"# eigenmatrix j={j} lambda={dec.eigenvalues[j]!r} (row, col, re, im)"]
        for a in range(basis.size):
            for b in range(basis.size):
                lines.append(f"{a} {b} {_fmt(m[a, b].real)} {_fmt(m[a, b].imag)}")
        run.text(f"eigmat_{tag}_j{j}.txt", "\n".join(lines) + "\n")
        run.csv(f"eigdiag_{tag}_j{j}.csv", "spectrum floquet",
                ["n", "rho_nn"],
                zip(basis.levels, np.real(np.diag(m))))


def _liouvillian_point(args):
    eff, n_max, top_k = args
    basis = quantum.MomentumBasis(n_max)
    op = effective.rotating_frame_liouvillian(eff, basis)
    dec = superop.diagonalize(op, values_only=True, destroy=True)
    return dec.eigenvalues[:top_k]


def cmd_spectrum_liouvillian(run: _Run) -> None:
    p = run.params
    if p.v_minus != 0.0:
        raise ValueError("spectrum liouvillian requires V_minus = 0 "
                         "(time-independent rotating frame)")
    gammas = _parse_sweep(run.args.gamma) if run.args.gamma else [p.gamma]
    top_k = run.cfg.run.top_k
    jobs = []
    for gm in gammas:
        pp = run.with_params(gamma=gm)
        eff = effective.EffectiveParams.from_model(pp)
        n_max = run.cfg.quantum.n_max or quantum.default_n_max(pp)
        jobs.append((eff, n_max, top_k))
    workers = run.cfg.run.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_liouvillian_point, jobs))
    else:
        results = [_liouvillian_point(j) for j in jobs]
    rows = []
    for gm, eigs in zip(gammas, results):
        for j, eps in enumerate(eigs):
            rows.append((gm, j, eps.real, eps.imag))
    run.csv("liouvillian_spectrum.csv", "spectrum liouvillian",
            ["gamma", "j", "re_eps", "im_eps"], rows)


# ---------------------------------------------------------------------------
# effective subcommands


def cmd_effective_separatrix(run: _Run) -> None:
    gammas = (_parse_sweep(run.args.gamma) if run.args.gamma
              else [run.params.gamma])
    rows = []
    for gm in gammas:
        eff = effective.EffectiveParams.from_model(run.with_params(gamma=gm))
        res = effective.separatrix_area(eff)
        rows.append((gm, math.nan if res.saddle_phase is None else res.saddle_phase,
                     res.area, int(res.exists)))
    run.csv("separatrix.csv", "effective separatrix",
            ["gamma", "saddle_phase", "area", "exists"], rows)
    geo = derive_geometry(run.params)
    run.json("separatrix.json", {
        "gamma_critical": geo.gamma_critical,
        "points": [{"gamma": r[0], "saddle_phase": None if math.isnan(r[1]) else r[1],
                    "area": r[2], "exists": bool(r[3])} for r in rows],
    })


def _lifetime_point(args):
    eff, n_max, threshold = args
    basis = quantum.MomentumBasis(n_max)
    mode = effective.slow_mode(eff, basis, gap_threshold=threshold)
    return mode.eps1


def cmd_effective_lifetime_scan(run: _Run) -> None:
    p = run.params
    if p.v_minus != 0.0:
        raise ValueError("lifetime-scan requires V_minus = 0")
    hbars = _parse_sweep(run.args.hbar or _DEF_HBAR_SCAN)
    jobs = []
    for hb in hbars:
        pp = run.with_params(hbar=hb)
        eff = effective.EffectiveParams.from_model(pp)
        jobs.append((eff, run.cfg.quantum.n_max or quantum.default_n_max(pp),
                     run.args.gap_threshold))
    workers = run.cfg.run.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            eps1s = list(pool.map(_lifetime_point, jobs))
    else:
        eps1s = [_lifetime_point(j) for j in jobs]
    taus = [2.0 * math.pi / abs(e.real) for e in eps1s]
    rows = [(hb, p.gamma, e.real, tau)
            for hb, e, tau in zip(hbars, eps1s, taus)]
    run.csv("lifetimes.csv", "effective lifetime-scan",
            ["hbar", "gamma", "re_eps1", "tau"], rows)
    sep = effective.separatrix_area(effective.EffectiveParams.from_model(p))
    fit = effective.fit_lifetime_scaling(list(zip(hbars, taus)), sep.area, p.gamma)
    run.json("lifetime_fit.json", {
        "A": fit.slope_a, "prefactor": fit.prefactor, "quality": fit.fit_quality,
        "S": sep.area, "gamma": p.gamma,
        "samples": [{"hbar": h, "tau": t} for h, t in fit.samples],
    })


# ---------------------------------------------------------------------------
# analyze subcommands


def _floquet_decomposition(run: _Run, n_matrices: int):
    p = run.params
    basis = quantum.MomentumBasis(run.cfg.quantum.n_max or quantum.default_n_max(p))
    op = superop.floquet_operator(basis, p, rep=superop.HERM,
                                  steps_per_period=run.cfg.quantum.steps_per_period)
    dec = superop.diagonalize(op, n_matrices=n_matrices)
    return basis, op, dec


def cmd_analyze_cycle_state(run: _Run) -> None:
    basis, _, dec = _floquet_decomposition(run, 3)
    report = {}
    for sign, name in ((+1, "plus"), (-1, "minus")):
        combo = analysis.build_cycle_state(dec, sign)
        report[name] = {"target": combo.target,
                        "concentration": combo.concentration,
                        "lambda_odd": [combo.lambda_odd.real, combo.lambda_odd.imag],
                        "lambda_even": [combo.lambda_even.real, combo.lambda_even.imag]}
        run.csv(f"cycle_state_{name}.csv", "analyze cycle-state",
                ["n", "rho_nn"],
                zip(basis.levels, np.real(np.diag(combo.state))))
    run.json("cycle_state.json", report)


def cmd_analyze_decay(run: _Run) -> None:
    basis, op, dec = _floquet_decomposition(run, 3)
    combo = analysis.build_cycle_state(dec, +1)
    ks, ms = np.triu_indices(basis.size, 1)

    def advance(rho):
        coords = superop.coords_from_matrices(rho[None, :, :], ks, ms)[:, 0]
        return superop.matrix_from_coords(op.matrix @ coords, ks, ms, basis.size)

    res = analysis.decay_curve(dec, combo.state, run.args.periods, advance,
                               run.params.period)
    run.csv("decay.csv", "analyze decay", ["t", "abs_overlap"],
            zip(res.times, np.abs(res.overlaps)))
    run.json("decay.json", {
        "fitted_tau": res.fitted_tau, "spectral_tau": res.spectral_tau,
        "fit_quality": res.fit_quality, "exponential": res.exponential,
    })


def cmd_analyze_compare(run: _Run) -> None:
    p = run.params
    qset = run.cfg.quantum
    cset = run.cfg.classical
    geo = derive_geometry(p)
    basis = quantum.MomentumBasis(qset.n_max or quantum.default_n_max(p))
    n0 = _initial_level(run)
    traj = quantum.evolve(_level_state(basis, n0),
                          (0.0, qset.t_final_periods * p.period), p,
                          steps_per_period=qset.steps_per_period,
                          sample_every_periods=qset.sample_every_periods)
    snap = analysis.DistributionSnapshot.from_rho(traj.states[-1],
                                                  float(traj.times[-1]), p.hbar)
    ens = classical.resonance_ensemble(p, cset.n_particles, seed=run.cfg.run.seed)
    final = classical.propagate_ensemble(ens, cset.t_final_periods * p.period,
                                         p, cset.steps_per_period)
    lim = 2.0 * p.omega / p.g
    edges = np.linspace(-lim, lim, cset.bins + 1)
    centers, mass = classical.action_histogram(final, edges)
    report = analysis.compare_distributions(snap, (centers, mass),
                                            geo.delta_i_plus)
    rows = [(i, w, "quantum") for i, w in zip(snap.actions, snap.populations)]
    rows += [(i, w, "classical") for i, w in zip(centers, mass)]
    run.csv("distributions.csv", "analyze compare", ["I", "weight", "source"], rows)

    def peaks(plist):
        return [{"position": pk.position, "height": pk.height,
                 "mass": pk.mass, "width": pk.width} for pk in plist]

    run.json("compare.json", {
        "quantum_peaks": peaks(report.quantum_peaks),
        "classical_peaks": peaks(report.classical_peaks),
        "quantum_regions": list(report.quantum_regions),
        "classical_regions": list(report.classical_regions),
        "quantum_asymmetry": report.quantum_asymmetry,
        "classical_asymmetry": report.classical_asymmetry,
    })


# ---------------------------------------------------------------------------
# parser / dispatch


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="drm", description="driven dissipative rotor simulations")
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--out-dir", help="output directory")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--seed", type=int, default=None)
    sub = ap.add_subparsers(dest="group", required=True)

    cl = sub.add_parser("classical").add_subparsers(dest="action", required=True)
    m = cl.add_parser("map")
    m.add_argument("--initial", help="theta,I for a single orbit")
    m.add_argument("--grid", default="24x24", help="NTHxNI initial grid")
    m.add_argument("--periods", type=int, default=None)
    m.set_defaults(func=cmd_classical_map)
    cl.add_parser("basins").set_defaults(func=cmd_classical_basins)
    cl.add_parser("ensemble").set_defaults(func=cmd_classical_ensemble)

    q = sub.add_parser("quantum").add_subparsers(dest="action", required=True)
    e = q.add_parser("evolve")
    e.add_argument("--initial-level", type=int, default=None)
    e.add_argument("--snapshots", action="store_true")
    e.set_defaults(func=cmd_quantum_evolve)

    sp = sub.add_parser("spectrum").add_subparsers(dest="action", required=True)
    f = sp.add_parser("floquet")
    f.add_argument("--omega", help="sweep start:stop:step or list")
    f.add_argument("--dump-eigenmatrices", type=int, default=0,
                   help="dump this many leading eigenmatrices per sweep point")
    f.set_defaults(func=cmd_spectrum_floquet)
    li = sp.add_parser("liouvillian")
    li.add_argument("--gamma", help="sweep start:stop:step or list")
    li.set_defaults(func=cmd_spectrum_liouvillian)

    ef = sub.add_parser("effective").add_subparsers(dest="action", required=True)
    s = ef.add_parser("separatrix")
    s.add_argument("--gamma", help="sweep start:stop:step or list")
    s.set_defaults(func=cmd_effective_separatrix)
    ls = ef.add_parser("lifetime-scan")
    ls.add_argument("--hbar", help=f"sweep or list (default {_DEF_HBAR_SCAN})")
    ls.add_argument("--gap-threshold", type=float, default=3.0)
    ls.set_defaults(func=cmd_effective_lifetime_scan)

    an = sub.add_parser("analyze").add_subparsers(dest="action", required=True)
    an.add_parser("cycle-state").set_defaults(func=cmd_analyze_cycle_state)
    d = an.add_parser("decay")
    d.add_argument("--periods", type=int, default=200)
    d.set_defaults(func=cmd_analyze_decay)
    c = an.add_parser("compare")
    c.add_argument("--initial-level", type=int, default=None)
    c.set_defaults(func=cmd_analyze_compare)
    return ap


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    args.argv = list(argv)
    try:
        run = _Run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(run)
        sub = f"{args.group} {args.action}"
        run.finish(sub)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODULE
    return EXIT_OK


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
