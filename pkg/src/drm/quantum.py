"""Master equation for the driven dissipative rotor on the momentum lattice.

Basis |n>, n = -nMax..nMax, I|n> = hbar*n|n>.  The Hamiltonian is tridiagonal:
diagonal G*hbar^2*n^2/2, nearest-neighbour coupling c(t) = -(V+ e^{-i w t}
+ V- e^{+i w t})/2.  Relaxation uses two half-lattice dissipators with
action-weighted jump amplitudes (rate gamma*|n| out of level n), the unique
convention that makes |0><0| dark and reproduces d<I>/dt = -gamma*<I> exactly,
i.e. the classical friction term.

The hot path is a fused numba kernel that evaluates the tridiagonal commutator
plus dissipators for a whole batch of matrices and accumulates the RK4
combination in the same sweep; evolve() runs it with batch size 1, the
propagator construction in superop feeds it the full operator basis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import ModelParams, derive_geometry


class TruncationWarning(UserWarning):
    """Boundary levels of the momentum lattice are getting populated."""


@dataclass(frozen=True)
class MomentumBasis:
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def size(self) -> int:
        return 2 * self.n_max + 1

    @property
    def levels(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)


def default_n_max(params: ModelParams) -> int:
    """Cutoff holding both resonances plus two island widths of margin."""
    geo = derive_geometry(params)
    margin = 2.0 * max(geo.delta_i_plus, geo.delta_i_minus)
    return math.ceil((params.omega / params.g + margin) / params.hbar)


def build_hamiltonian(t: float, basis: MomentumBasis, params: ModelParams) -> np.ndarray:
    """Tridiagonal H(t); <n+1|H|n> = -(V+ e^{-iwt} + V- e^{iwt})/2."""
    n = basis.levels.astype(float)
    h = np.zeros((basis.size, basis.size), dtype=complex)
    np.fill_diagonal(h, 0.5 * params.g * params.hbar**2 * n**2)
    c = -0.5 * (params.v_plus * np.exp(-1j * params.omega * t)
                + params.v_minus * np.exp(1j * params.omega * t))
    idx = np.arange(basis.size - 1)
    h[idx + 1, idx] = c
    h[idx, idx + 1] = np.conj(c)
    return h


def _lattice(rho: np.ndarray) -> np.ndarray:
    size = rho.shape[0]
    if rho.shape != (size, size) or size % 2 == 0:
        raise ValueError(f"density matrix must be square with odd size, got {rho.shape}")
    return np.arange(size) - (size - 1) // 2


def apply_dissipators(rho: np.ndarray, params: ModelParams) -> np.ndarray:
    """G+(rho) + G-(rho); population of |n| decays at rate gamma*|n|."""
    n = _lattice(rho)
    absn = np.abs(n).astype(float)
    out = -0.5 * (absn[:, None] + absn[None, :]) * rho
    sp = np.sqrt(np.maximum(n, 0).astype(float))
    sm = np.sqrt(np.maximum(-n, 0).astype(float))
    gain = np.zeros_like(rho)
    gain[:-1, :-1] += sp[1:, None] * sp[None, 1:] * rho[1:, 1:]
    gain[1:, 1:] += sm[:-1, None] * sm[None, :-1] * rho[:-1, :-1]
    return params.gamma * (out + gain)


def master_rhs(rho: np.ndarray, t: float, params: ModelParams) -> np.ndarray:
    """d rho/dt = -(i/hbar)[H(t), rho] + G+(rho) + G-(rho)."""
    basis = MomentumBasis((rho.shape[0] - 1) // 2)
    h = build_hamiltonian(t, basis, params)
    comm = h @ rho - rho @ h
    return -1j / params.hbar * comm + apply_dissipators(rho, params)


# ---------------------------------------------------------------------------
# fused batch kernel


@njit(cache=True, fastmath=True)
def _rhs_kernel(out, acc, w, init, x, coef, dd, wp, wm, loss,
                c1re, c1im, c2re, c2im, src):
    """out = rhs(src + coef*x) for a batch; acc accumulates w*out (RK4 sum).

    dd[i,j] = (E_i - E_j)/hbar from the diagonal part of H, c1/c2 are the
    drive couplings (lower/upper diagonal of -iH/hbar), loss/wp/wm the
    dissipator decay and gain tables.
    """
    B, N, _ = x.shape
    for b in range(B):
        for i in range(N):
            for j in range(N):
                v = src[b, i, j] + coef * x[b, i, j]
                am = src[b, i - 1, j] + coef * x[b, i - 1, j] if i > 0 else 0j
                ap = src[b, i + 1, j] + coef * x[b, i + 1, j] if i < N - 1 else 0j
                bm = src[b, i, j - 1] + coef * x[b, i, j - 1] if j > 0 else 0j
                bp = src[b, i, j + 1] + coef * x[b, i, j + 1] if j < N - 1 else 0j
                dmm = src[b, i - 1, j - 1] + coef * x[b, i - 1, j - 1] if (i > 0 and j > 0) else 0j
                dpp = src[b, i + 1, j + 1] + coef * x[b, i + 1, j + 1] if (i < N - 1 and j < N - 1) else 0j
                re = dd[i, j] * v.imag
                im = -dd[i, j] * v.real
                t1 = am - bp
                re += c1re * t1.real - c1im * t1.imag
                im += c1re * t1.imag + c1im * t1.real
                t2 = ap - bm
                re += c2re * t2.real - c2im * t2.imag
                im += c2re * t2.imag + c2im * t2.real
                re += -loss[i, j] * v.real + wp[i, j] * dpp.real + wm[i, j] * dmm.real
                im += -loss[i, j] * v.imag + wp[i, j] * dpp.imag + wm[i, j] * dmm.imag
                val = complex(re, im)
                out[b, i, j] = val
                if init:
                    acc[b, i, j] = w * val
                else:
                    acc[b, i, j] += w * val


def coupling_tables(n_max: int, params: ModelParams):
    """Time-independent lookup tables feeding _rhs_kernel."""
    lv = np.arange(-n_max, n_max + 1).astype(np.float64)
    d = 0.5 * params.g * params.hbar**2 * lv**2
    dd = (d[:, None] - d[None, :]) / params.hbar
    absl = np.abs(lv)
    loss = 0.5 * params.gamma * (absl[:, None] + absl[None, :])
    sp = np.sqrt(np.maximum(lv, 0.0))
    sm = np.sqrt(np.maximum(-lv, 0.0))
    wp = np.zeros((lv.size, lv.size))
    wm = np.zeros((lv.size, lv.size))
    wp[:-1, :-1] = params.gamma * sp[1:, None] * sp[None, 1:]
    wm[1:, 1:] = params.gamma * sm[:-1, None] * sm[None, :-1]
    return dd, loss, wp, wm


def _drive_scalars(t: float, params: ModelParams):
    c = -0.5 * (params.v_plus * np.exp(-1j * params.omega * t)
                + params.v_minus * np.exp(1j * params.omega * t))
    c1 = -1j * c / params.hbar
    c2 = -1j * np.conj(c) / params.hbar
    return c1.real, c1.imag, c2.real, c2.imag


def hermitize(x: np.ndarray, block: int = 64) -> None:
    """In-place x <- (x + x^dag)/2 over the batch, in small blocks."""
    for s in range(0, x.shape[0], block):
        blk = x[s:s + block]
        tmp = np.conj(blk.transpose(0, 2, 1))
        np.add(blk, tmp, out=blk)
        blk *= 0.5


def propagate_batch(x: np.ndarray, t0: float, n_steps: int, dt: float,
                    params: ModelParams, herm_every: int = 0) -> np.ndarray:
    """Advance a batch (B, N, N) of matrices by n_steps of RK4 in place.

    herm_every > 0 re-symmetrizes every that many steps (harmless for
    Hermitian payloads, skip for non-Hermitian operator-basis columns).
    """
    n_max = (x.shape[1] - 1) // 2
    dd, loss, wp, wm = coupling_tables(n_max, params)
    acc = np.empty_like(x)
    ka = np.empty_like(x)
    kb = np.empty_like(x)
    h = dt
    for s in range(n_steps):
        t = t0 + s * h
        a = _drive_scalars(t, params)
        m = _drive_scalars(t + 0.5 * h, params)
        e = _drive_scalars(t + h, params)
        _rhs_kernel(ka, acc, 1.0, True, x, 0.0, dd, wp, wm, loss, *a, x)
        _rhs_kernel(kb, acc, 2.0, False, ka, 0.5 * h, dd, wp, wm, loss, *m, x)
        _rhs_kernel(ka, acc, 2.0, False, kb, 0.5 * h, dd, wp, wm, loss, *m, x)
        _rhs_kernel(kb, acc, 1.0, False, ka, h, dd, wp, wm, loss, *e, x)
        acc *= h / 6.0
        x += acc
        if herm_every and (s + 1) % herm_every == 0:
            hermitize(x)
    return x


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (S, N, N) complex
    basis: MomentumBasis


def boundary_population(rho: np.ndarray) -> float:
    return float(rho[0, 0].real + rho[-1, -1].real)


def evolve(rho0: np.ndarray, t_span: tuple[float, float], params: ModelParams,
           steps_per_period: int = 512, sample_every_periods: int = 10,
           boundary_tol: float = 1e-6) -> Trajectory:
    """Integrate rho0 over t_span, re-symmetrizing each step.

    Samples are taken every sample_every_periods periods (plus the endpoints).
    Warns with TruncationWarning once boundary-level population exceeds
    boundary_tol.  t_span must start and end on integer step multiples of the
    fixed step T/steps_per_period.
    """
    t0, t1 = t_span
    dt = params.period / steps_per_period
    total = (t1 - t0) / dt
    n_steps = int(round(total))
    if abs(total - n_steps) > 1e-9 * max(1.0, abs(total)):
        raise ValueError("t_span must be a whole number of integrator steps")
    basis = MomentumBasis((rho0.shape[0] - 1) // 2)
    chunk = steps_per_period * sample_every_periods
    x = np.ascontiguousarray(rho0, dtype=complex)[None, :, :].copy()
    times = [t0]
    states = [x[0].copy()]
    warned = False
    done = 0
    while done < n_steps:
        take = min(chunk, n_steps - done)
        propagate_batch(x, t0 + done * dt, take, dt, params, herm_every=1)
        done += take
        times.append(t0 + done * dt)
        states.append(x[0].copy())
        if not warned and boundary_population(x[0]) > boundary_tol:
            warnings.warn(
                f"boundary population {boundary_population(x[0]):.2e} exceeds "
                f"{boundary_tol:.0e}; enlarge n_max", TruncationWarning)
            warned = True
    return Trajectory(np.array(times), np.array(states), basis)


def expectation_action(rho: np.ndarray, params: ModelParams) -> float:
    """<I> = hbar * sum_n n*rho_nn."""
    n = _lattice(rho)
    return float(params.hbar * np.sum(n * np.real(np.diag(rho))))
