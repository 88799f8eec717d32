"""Classical dissipative dynamics of the doubly driven rotor.

Equations of motion:
    theta' = G*I
    I'     = -V+ sin(theta - omega t) - V- sin(theta + omega t) - gamma*I

Fixed-step RK4 throughout (default 512 steps per period); the batch kernels
are numba-compiled and integrate many trajectories with no shared state, so
grid censuses and ensembles can be chunked across workers freely.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .model import ModelParams, derive_geometry

TWO_PI = 2.0 * math.pi

# attractor label kinds (census codes are the tuple indices)
UNRESOLVED = "Unresolved"
UPPER_CYCLE = "UpperCycle"
LOWER_CYCLE = "LowerCycle"
FIXED_POINT_0 = "FixedPoint0"
FIXED_POINT_PI = "FixedPointPi"
LABEL_KINDS = (UNRESOLVED, UPPER_CYCLE, LOWER_CYCLE, FIXED_POINT_0, FIXED_POINT_PI)


class PhasePoint(NamedTuple):
    theta: float
    action: float


@dataclass(frozen=True)
class AttractorLabel:
    kind: str
    final_point: PhasePoint


@dataclass
class Ensemble:
    """Weighted particle cloud; points[:, 0] = theta, points[:, 1] = I."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.points.shape[1] != 2 or self.points.shape[0] != self.weights.shape[0]:
            raise ValueError("ensemble points/weights shape mismatch")
        if np.any(self.weights < 0):
            raise ValueError("ensemble weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError(f"ensemble weights must sum to 1, got {self.weights.sum()!r}")


@njit(cache=True)
def _advance(thetas, actions, t0, n_steps, dt, g, vp, vm, omega, gamma):
    """In-place RK4 advance of a batch of trajectories by n_steps of size dt."""
    for k in range(thetas.shape[0]):
        th = thetas[k]
        ac = actions[k]
        t = t0
        for _ in range(n_steps):
            k1t = g * ac
            k1a = -vp * np.sin(th - omega * t) - vm * np.sin(th + omega * t) - gamma * ac
            th2 = th + 0.5 * dt * k1t
            ac2 = ac + 0.5 * dt * k1a
            t2 = t + 0.5 * dt
            k2t = g * ac2
            k2a = -vp * np.sin(th2 - omega * t2) - vm * np.sin(th2 + omega * t2) - gamma * ac2
            th3 = th + 0.5 * dt * k2t
            ac3 = ac + 0.5 * dt * k2a
            k3t = g * ac3
            k3a = -vp * np.sin(th3 - omega * t2) - vm * np.sin(th3 + omega * t2) - gamma * ac3
            th4 = th + dt * k3t
            ac4 = ac + dt * k3a
            t4 = t + dt
            k4t = g * ac4
            k4a = -vp * np.sin(th4 - omega * t4) - vm * np.sin(th4 + omega * t4) - gamma * ac4
            th = th + dt * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0
            ac = ac + dt * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
            t = t + dt
        thetas[k] = th
        actions[k] = ac


@njit(cache=True)
def _classify_batch(thetas, actions, codes, steps_per_period, horizon, dt,
                    g, vp, vm, omega, gamma, i_plus, tol, stable_needed):
    """Label each trajectory by its attractor (codes index LABEL_KINDS).

    Integrates period by period; the cycle test uses the action averaged over
    the last period (the cycles sweep theta, so instantaneous I oscillates),
    fixed points use the stroboscopic state.  Exits early once the same
    non-Unresolved label repeats stable_needed times.
    """
    n = thetas.shape[0]
    for k in range(n):
        th = thetas[k]
        ac = actions[k]
        t = 0.0
        code = 0
        streak = 0
        for _p in range(horizon):
            mean_ac = 0.0
            for _ in range(steps_per_period):
                k1t = g * ac
                k1a = -vp * np.sin(th - omega * t) - vm * np.sin(th + omega * t) - gamma * ac
                th2 = th + 0.5 * dt * k1t
                ac2 = ac + 0.5 * dt * k1a
                t2 = t + 0.5 * dt
                k2t = g * ac2
                k2a = -vp * np.sin(th2 - omega * t2) - vm * np.sin(th2 + omega * t2) - gamma * ac2
                th3 = th + 0.5 * dt * k2t
                ac3 = ac + 0.5 * dt * k2a
                k3t = g * ac3
                k3a = -vp * np.sin(th3 - omega * t2) - vm * np.sin(th3 + omega * t2) - gamma * ac3
                th4 = th + dt * k3t
                ac4 = ac + dt * k3a
                t4 = t + dt
                k4t = g * ac4
                k4a = -vp * np.sin(th4 - omega * t4) - vm * np.sin(th4 + omega * t4) - gamma * ac4
                th = th + dt * (k1t + 2.0 * k2t + 2.0 * k3t + k4t) / 6.0
                ac = ac + dt * (k1a + 2.0 * k2a + 2.0 * k3a + k4a) / 6.0
                t = t + dt
                mean_ac += ac
            mean_ac /= steps_per_period
            th_mod = th % TWO_PI
            d0 = min(th_mod, TWO_PI - th_mod)
            dpi = abs(th_mod - np.pi)
            if abs(mean_ac - i_plus) < tol:
                new_code = 1
            elif abs(mean_ac + i_plus) < tol:
                new_code = 2
            elif abs(ac) < tol and d0 < tol:
                new_code = 3
            elif abs(ac) < tol and dpi < tol:
                new_code = 4
            else:
                new_code = 0
            if new_code == code and new_code != 0:
                streak += 1
            else:
                streak = 1
            code = new_code
            if code != 0 and streak >= stable_needed:
                break
        thetas[k] = th % TWO_PI
        actions[k] = ac
        codes[k] = code


def step(state: PhasePoint, t: float, dt: float, params: ModelParams) -> PhasePoint:
    """One RK4 step from time t; theta reduced mod 2*pi on output."""
    th = np.array([state[0]], dtype=float)
    ac = np.array([state[1]], dtype=float)
    _advance(th, ac, t, 1, dt, params.g, params.v_plus, params.v_minus,
             params.omega, params.gamma)
    return PhasePoint(th[0] % TWO_PI, ac[0])


def stroboscopic_map(initial, periods: int, params: ModelParams,
                     steps_per_period: int = 512) -> np.ndarray:
    """States at t = 0, T, 2T, ..., periods*T as an array of (theta, I) rows."""
    if periods < 1:
        raise ValueError("periods must be >= 1")
    th = np.array([initial[0]], dtype=float)
    ac = np.array([initial[1]], dtype=float)
    dt = params.period / steps_per_period
    out = np.empty((periods + 1, 2))
    out[0] = initial[0] % TWO_PI, initial[1]
    for p in range(periods):
        _advance(th, ac, p * params.period, steps_per_period, dt,
                 params.g, params.v_plus, params.v_minus, params.omega, params.gamma)
        out[p + 1] = th[0] % TWO_PI, ac[0]
    return out


def _census_chunk(args):
    thetas, actions, params_tuple, steps_per_period, horizon, tol, stable_needed = args
    g, vp, vm, omega, gamma = params_tuple
    th = thetas.copy()
    ac = actions.copy()
    codes = np.zeros(th.shape[0], dtype=np.int64)
    dt = (TWO_PI / omega) / steps_per_period
    _classify_batch(th, ac, codes, steps_per_period, horizon, dt,
                    g, vp, vm, omega, gamma, omega / g, tol, stable_needed)
    return th, ac, codes


def default_tol(params: ModelParams) -> float:
    return 0.1 * derive_geometry(params).delta_i_plus


def classify_basin(initial, params: ModelParams, horizon: int = 400,
                   tol: float | None = None, steps_per_period: int = 512,
                   stable_needed: int = 5) -> AttractorLabel:
    """Attractor label for one initial condition (requires gamma > 0)."""
    if params.gamma <= 0:
        raise ValueError("basin classification needs gamma > 0")
    if tol is None:
        tol = default_tol(params)
    th, ac, codes = _census_chunk((
        np.array([initial[0]], dtype=float), np.array([initial[1]], dtype=float),
        (params.g, params.v_plus, params.v_minus, params.omega, params.gamma),
        steps_per_period, horizon, tol, stable_needed))
    return AttractorLabel(LABEL_KINDS[codes[0]], PhasePoint(th[0], ac[0]))


def basin_census(params: ModelParams, grid_theta: int = 200, grid_action: int = 200,
                 action_range: tuple[float, float] | None = None,
                 horizon: int = 400, tol: float | None = None,
                 steps_per_period: int = 512, stable_needed: int = 5,
                 workers: int = 1):
    """Classify a full grid of initial conditions.

    Returns (theta0, I0, kinds) flat arrays in row-major grid order (theta
    fastest).  Chunking across workers is deterministic, so the output is
    independent of the worker count.
    """
    if params.gamma <= 0:
        raise ValueError("basin census needs gamma > 0")
    if tol is None:
        tol = default_tol(params)
    if action_range is None:
        lim = 2.0 * params.omega / params.g
        action_range = (-lim, lim)
    thetas = np.linspace(0.0, TWO_PI, grid_theta, endpoint=False)
    actions = np.linspace(action_range[0], action_range[1], grid_action)
    gi, gt = np.meshgrid(actions, thetas, indexing="ij")
    flat_th = gt.ravel().copy()
    flat_ac = gi.ravel().copy()
    ptup = (params.g, params.v_plus, params.v_minus, params.omega, params.gamma)
    if workers <= 1:
        _, _, codes = _census_chunk((flat_th, flat_ac, ptup, steps_per_period,
                                     horizon, tol, stable_needed))
    else:
        chunks = np.array_split(np.arange(flat_th.size), workers)
        jobs = [(flat_th[c], flat_ac[c], ptup, steps_per_period, horizon, tol,
                 stable_needed) for c in chunks]
        codes = np.empty(flat_th.size, dtype=np.int64)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for c, (_, _, part) in zip(chunks, pool.map(_census_chunk, jobs)):
                codes[c] = part
    kinds = np.array([LABEL_KINDS[c] for c in codes])
    return flat_th, flat_ac, kinds


def propagate_ensemble(ens: Ensemble, t_final: float, params: ModelParams,
                       steps_per_period: int = 512) -> Ensemble:
    """Integrate every member to t_final; weights pass through unchanged."""
    dt = params.period / steps_per_period
    n_steps = int(round(t_final / dt))
    th = ens.points[:, 0].copy()
    ac = ens.points[:, 1].copy()
    if n_steps > 0:
        _advance(th, ac, 0.0, n_steps, dt, params.g, params.v_plus,
                 params.v_minus, params.omega, params.gamma)
    return Ensemble(np.column_stack([th % TWO_PI, ac]), ens.weights.copy())


def action_histogram(ens: Ensemble, bins) -> tuple[np.ndarray, np.ndarray]:
    """Weighted action histogram normalized by total ensemble weight.

    Returns (bin_centers, mass_per_bin); mass outside the bin range is
    dropped, so the column sums to <= 1.
    """
    if ens.points.shape[0] == 0:
        raise ValueError("empty ensemble")
    bins = np.asarray(bins, dtype=float)
    if bins.ndim != 1 or bins.size < 2 or np.any(np.diff(bins) <= 0):
        raise ValueError("bins must be an increasing array of edges")
    mass, edges = np.histogram(ens.points[:, 1], bins=bins, weights=ens.weights)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, mass / ens.weights.sum()


def resonance_ensemble(params: ModelParams, n_particles: int, seed: int = 0,
                       action: float | None = None) -> Ensemble:
    """Uniform-theta ensemble sitting on the upper resonance line I = I+."""
    rng = np.random.default_rng(seed)
    if action is None:
        action = params.omega / params.g
    pts = np.column_stack([rng.uniform(0.0, TWO_PI, n_particles),
                           np.full(n_particles, float(action))])
    return Ensemble(pts, np.full(n_particles, 1.0 / n_particles))
