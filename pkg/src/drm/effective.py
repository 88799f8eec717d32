"""Single-resonance effective model: tilted pendulum around I = I+.

In the co-rotating frame (J = I - I+, phase = theta - omega*t) the upper
resonance is governed by H_eff = G J^2/2 - V+ cos(phase) + gamma*I+ * phase.
This module computes the separatrix area of the local basin and, for the
V- = 0 configuration, the metastable-state lifetime from the slow eigenvalue
of the (time-independent, rotating-frame) Liouvillian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.optimize

from .model import ModelParams
from .quantum import MomentumBasis
from .superop import (HERM, LIOUVILLIAN, SuperOperator, diagonalize,
                      real_rep_generator)


@dataclass(frozen=True)
class EffectiveParams:
    g: float
    v_plus: float
    gamma: float
    i_plus: float
    hbar: float = 0.5

    def __post_init__(self):
        if not self.g > 0:
            raise ValueError(f"G must be > 0, got {self.g}")
        if not self.v_plus > 0:
            raise ValueError(f"V_plus must be > 0, got {self.v_plus}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.i_plus > 0:
            raise ValueError(f"I_plus must be > 0, got {self.i_plus}")
        if not self.hbar > 0:
            raise ValueError(f"hbar must be > 0, got {self.hbar}")

    @property
    def tilt(self) -> float:
        return self.gamma * self.i_plus

    @classmethod
    def from_model(cls, params: ModelParams) -> "EffectiveParams":
        return cls(g=params.g, v_plus=params.v_plus, gamma=params.gamma,
                   i_plus=params.omega / params.g, hbar=params.hbar)


@dataclass(frozen=True)
class SeparatrixResult:
    saddle_phase: float | None
    area: float
    exists: bool


def potential(eff: EffectiveParams, phase) -> np.ndarray:
    return -eff.v_plus * np.cos(phase) + eff.tilt * phase


def separatrix_area(eff: EffectiveParams, quad_tol: float = 1e-10) -> SeparatrixResult:
    """Phase-space area enclosed by the separatrix of the tilted pendulum.

    The saddle sits at phase_s = arcsin(tilt/V+) - pi (potential maximum);
    the loop runs from there to the right turning point at the same energy.
    No basin exists once the tilt reaches V+ (the strict threshold is the
    critical damping gamma_c = V+/I+).
    """
    ratio = eff.tilt / eff.v_plus
    if ratio >= 1.0:
        return SeparatrixResult(None, 0.0, False)
    theta0 = math.asin(ratio)
    phase_s = theta0 - math.pi
    e_s = potential(eff, phase_s)

    if eff.tilt == 0.0:
        phase_r = math.pi
    else:
        center = -theta0
        f = lambda p: potential(eff, p) - e_s
        phase_r = scipy.optimize.brentq(f, center, phase_s + 2.0 * math.pi,
                                        xtol=1e-14, rtol=1e-15)

    def width(p):
        gap = e_s - potential(eff, p)
        return 2.0 * np.sqrt(np.maximum(2.0 * gap / eff.g, 0.0))

    area, abserr = scipy.integrate.quad(width, phase_s, phase_r, limit=200)
    # error gate against the zero-damping area scale: the basin itself can be
    # arbitrarily small just below the critical tilt
    scale = 16.0 * math.sqrt(eff.v_plus / eff.g)
    if abserr > max(quad_tol, 1e-8 * scale):
        raise RuntimeError(
            f"separatrix quadrature did not converge: residual {abserr:.3e} "
            f"for area {area:.6e}")
    return SeparatrixResult(phase_s, float(area), True)


def rotating_frame_liouvillian(eff: EffectiveParams, basis: MomentumBasis) -> SuperOperator:
    """Time-independent generator of the V-=0 model in the co-rotating frame.

    H_rot = G hbar^2 n^2/2 - hbar*omega*n - (V+/2)(shift+ + shift-) with
    omega = G*I+; the dissipators are frame-invariant.  Returned in the real
    HERM representation.
    """
    params = ModelParams(g=eff.g, v_plus=eff.v_plus, v_minus=0.0,
                         omega=eff.g * eff.i_plus, gamma=eff.gamma,
                         hbar=eff.hbar)
    n = basis.levels.astype(float)
    diag = 0.5 * eff.g * eff.hbar**2 * n**2 - eff.hbar * params.omega * n
    mat = real_rep_generator(diag, -0.5 * eff.v_plus + 0.0j, params)
    return SuperOperator(mat, HERM, LIOUVILLIAN, basis, t=0.0)


@dataclass(frozen=True)
class SlowMode:
    eps1: complex
    isolation: float
    eigenvalues: np.ndarray  # leading part of the spectrum, sorted by Re desc


def slow_mode(eff: EffectiveParams, basis: MomentumBasis,
              gap_threshold: float = 3.0, keep: int = 64,
              oscillation_cut: float | None = None) -> SlowMode:
    """Identify the isolated slow eigenvalue eps_1 of the rotating-frame L.

    eps_1 is the largest-Re nonzero eigenvalue; its isolation is measured
    against the next eigenvalue that is not part of an oscillatory sideband
    (|Im eps| below omega/4 by default), since those sit at Re ~ -gamma/2
    regardless of the slow dynamics.  Raises if the isolation ratio falls
    below gap_threshold.
    """
    if oscillation_cut is None:
        oscillation_cut = 0.25 * eff.g * eff.i_plus
    op = rotating_frame_liouvillian(eff, basis)
    dec = diagonalize(op, values_only=True, destroy=True)
    eigs = dec.eigenvalues
    eps1 = eigs[1]
    ref = None
    for e in eigs[2:]:
        if abs(e.imag) < oscillation_cut:
            ref = e
            break
    if ref is None:
        raise RuntimeError("no non-oscillatory reference eigenvalue found")
    isolation = abs(ref.real) / abs(eps1.real)
    if isolation < gap_threshold:
        raise RuntimeError(
            f"slow mode not isolated: |Re eps_ref|/|Re eps_1| = {isolation:.3f} "
            f"< {gap_threshold} (eps1={eps1:.4e}, ref={ref:.4e}); "
            "review gamma/hbar or enlarge the basis")
    return SlowMode(eps1, isolation, eigs[:keep])


def lifetime_from_liouvillian(eff: EffectiveParams, basis: MomentumBasis,
                              gap_threshold: float = 3.0) -> float:
    """tau = 2*pi/|Re eps_1| of the isolated slow mode."""
    mode = slow_mode(eff, basis, gap_threshold=gap_threshold)
    return 2.0 * math.pi / abs(mode.eps1.real)


@dataclass(frozen=True)
class LifetimeFit:
    samples: tuple
    slope_a: float
    prefactor: float
    fit_quality: float


def fit_lifetime_scaling(samples, s_area: float, gamma: float) -> LifetimeFit:
    """Least-squares fit of ln(gamma*tau) against S/hbar.

    samples: iterable of (hbar, tau).  The model is
    tau = (prefactor/gamma) * exp(A * S/hbar); returns A (slope_a), the
    prefactor, and the coefficient of determination.
    """
    samples = tuple((float(h), float(t)) for h, t in samples)
    if len(samples) < 4:
        raise ValueError(f"need >= 4 samples, got {len(samples)}")
    hb = np.array([s[0] for s in samples])
    tau = np.array([s[1] for s in samples])
    if np.any(tau <= 0) or np.any(hb <= 0):
        raise ValueError("samples must have positive hbar and tau")
    inv = 1.0 / hb
    if inv.max() < 2.0 * inv.min():
        raise ValueError("samples must span at least a factor 2 in 1/hbar")
    x = s_area * inv
    if np.ptp(x) == 0:
        raise ValueError("degenerate samples: all S/hbar equal")
    y = np.log(gamma * tau)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    quality = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 0.0
    return LifetimeFit(samples, float(slope), float(math.exp(intercept)),
                       float(quality))
