"""Observables derived from spectra and trajectories: metastable limit-cycle
superpositions, decay curves, and quantum/classical distribution comparisons.

The metastable combination rho0 + a*rho_even + b*rho_odd is pinned down by
physicality rather than by a normalization convention on the eigenmatrices:
(a, b) is the extreme point of the polytope of nonnegative diagonals that
maximizes population on the requested half-lattice, which reproduces the
upper (sign=+1) or lower (sign=-1) cycle state regardless of how the
eigensolver scaled or oriented the decaying modes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .superop import FLOQUET, SpectralDecomposition

UPPER = "UpperCycle"
LOWER = "LowerCycle"


# ---------------------------------------------------------------------------
# metastable limit-cycle states


@dataclass(frozen=True)
class MetastableCombination:
    state: np.ndarray
    target: str
    sign: int
    concentration: float
    stationary: np.ndarray
    odd_mode: np.ndarray
    even_mode: np.ndarray
    lambda_odd: complex
    lambda_even: complex

    def predict(self, m: int) -> np.ndarray:
        """Three-term discrete-time decay after m periods."""
        return (self.stationary
                + self.sign * self.lambda_odd**m * self.odd_mode
                + self.lambda_even**m * self.even_mode)


def _diag_parity(mat: np.ndarray) -> tuple[float, float]:
    d = np.real(np.diag(mat))
    scale = max(np.abs(d).max(), 1e-300)
    odd_err = np.abs(d + d[::-1]).max() / scale
    even_err = np.abs(d - d[::-1]).max() / scale
    return odd_err, even_err


def build_cycle_state(dec: SpectralDecomposition, sign: int,
                      concentration_threshold: float = 0.7) -> MetastableCombination:
    """Superposition of the three leading eigenmatrices localized on one cycle.

    Requires a Floquet decomposition of the symmetric model in the
    near-degenerate regime; modes 1 and 2 are identified as odd/even by the
    parity of their diagonals, not by index order.  The mode coefficients are
    the extreme point of the positivity polytope
    {rho0 + a*even + b*odd : diag >= 0} that maximizes diagonal mass on the
    target half-lattice, so the combination is a physical (unit-trace,
    nonnegative-population) density matrix and the concentration a genuine
    probability.
    """
    if sign not in (+1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if dec.eigenmatrices is None or len(dec.eigenmatrices) < 3:
        raise ValueError("decomposition must carry at least 3 eigenmatrices")
    rho_inf = dec.eigenmatrices[0]
    rho_inf = rho_inf / np.trace(rho_inf).real
    modes = [np.array(dec.eigenmatrices[j]) for j in (1, 2)]
    lams = [dec.eigenvalues[1], dec.eigenvalues[2]]
    parities = []
    for m in modes:
        odd_err, even_err = _diag_parity(m)
        parities.append("odd" if odd_err < even_err else "even")
    if set(parities) != {"odd", "even"}:
        raise RuntimeError(
            f"leading decaying modes are not an odd/even pair (parities "
            f"{parities}); not in the metastable limit-cycle regime")
    i_odd = parities.index("odd")
    odd, even = modes[i_odd], modes[1 - i_odd]
    lam_odd, lam_even = lams[i_odd], lams[1 - i_odd]

    n_sz = rho_inf.shape[0]
    n_max = (n_sz - 1) // 2
    levels = np.arange(-n_max, n_max + 1)
    target_side = (sign * levels) > 0
    d0 = np.real(np.diag(rho_inf))
    d_even = np.real(np.diag(even))
    d_odd = np.real(np.diag(odd))
    # maximize mass on the target side over (a, b); slack absorbs eigensolver
    # noise in the rho0 tails, the caps only rule out a degenerate program
    cap_e = 50.0 / max(np.linalg.norm(even), 1e-300)
    cap_o = 50.0 / max(np.linalg.norm(odd), 1e-300)
    res = scipy.optimize.linprog(
        c=[-d_even[target_side].sum(), -d_odd[target_side].sum()],
        A_ub=-np.column_stack([d_even, d_odd]),
        b_ub=d0 + 1e-9 * d0.max(),
        bounds=[(-cap_e, cap_e), (-cap_o, cap_o)], method="highs")
    if not res.success:
        raise RuntimeError(f"cycle-state positivity program failed: {res.message}")
    a, b = res.x
    if max(abs(a) / cap_e, abs(b) / cap_o) > 0.99:
        raise RuntimeError(
            "cycle-state coefficients ran into their caps; slow modes do not "
            "span a metastable cycle manifold")

    state = rho_inf + a * even + b * odd
    state = state / np.trace(state).real
    diag = np.real(np.diag(state))
    conc = diag[target_side].sum()
    target = UPPER if sign > 0 else LOWER
    if conc < concentration_threshold:
        raise RuntimeError(
            f"cycle-state concentration {conc:.3f} below "
            f"{concentration_threshold}; slow modes do not localize on a cycle")
    return MetastableCombination(state, target, sign, float(conc), rho_inf,
                                 sign * b * odd, a * even, lam_odd, lam_even)


# ---------------------------------------------------------------------------
# decay curves


@dataclass(frozen=True)
class DecayResult:
    times: np.ndarray
    overlaps: np.ndarray  # complex projections onto the slow mode
    fitted_tau: float
    spectral_tau: float
    fit_quality: float
    exponential: bool  # False flags a non-exponential regime


def spectral_tau(dec: SpectralDecomposition, period: float | None = None) -> float:
    """Lifetime 2*pi/|rate| of the slowest decaying mode.

    Liouvillian: rate = |Re eps_1|.  Floquet: rate = -ln|lambda_1|/T.
    """
    if dec.kind == FLOQUET:
        if period is None:
            raise ValueError("period required for Floquet decompositions")
        rate = -math.log(abs(dec.eigenvalues[1])) / period
    else:
        rate = abs(dec.eigenvalues[1].real)
    return 2.0 * math.pi / rate


def decay_curve(dec: SpectralDecomposition, rho0: np.ndarray, horizon: int,
                advance_period, period: float,
                quality_threshold: float = 0.95) -> DecayResult:
    """Project direct evolution onto the slow eigenmatrix, fit the decay.

    advance_period: callable rho -> rho advancing exactly one period.  Both
    the fitted and the spectral lifetime carry the same 2*pi convention
    (tau = 2*pi * e-folding time), so they are directly comparable.
    """
    if dec.eigenmatrices is None or len(dec.eigenmatrices) < 2:
        raise ValueError("decomposition must carry eigenmatrices")
    rho_inf = dec.eigenmatrices[0]
    slow = dec.eigenmatrices[1]
    tau_s = spectral_tau(dec, period)

    rho = np.array(rho0, dtype=complex)
    times = np.arange(horizon + 1) * period
    overlaps = np.empty(horizon + 1, dtype=complex)
    for m in range(horizon + 1):
        overlaps[m] = np.vdot(slow, rho - rho_inf)  # Tr(slow^dag (rho-rho_inf))
        if m < horizon:
            rho = advance_period(rho)

    mags = np.abs(overlaps)
    if mags.max() < 1e-13:
        return DecayResult(times, overlaps, math.nan, tau_s, 0.0, False)
    keep = mags > 1e-13 * mags.max()
    x = times[keep]
    y = np.log(mags[keep])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    quality = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    fitted = 2.0 * math.pi / abs(slope) if slope < 0 else math.inf
    return DecayResult(times, overlaps, float(fitted), tau_s, float(quality),
                       bool(quality >= quality_threshold))


# ---------------------------------------------------------------------------
# distribution comparison


@dataclass(frozen=True)
class DistributionSnapshot:
    time: float
    levels: np.ndarray
    populations: np.ndarray
    hbar: float

    @property
    def actions(self) -> np.ndarray:
        return self.hbar * self.levels

    @classmethod
    def from_rho(cls, rho: np.ndarray, time: float, hbar: float) -> "DistributionSnapshot":
        p = np.real(np.diag(rho))
        total = p.sum()
        if abs(total - 1.0) > 1e-8:
            raise ValueError(f"populations sum to {total!r}, expected 1 within 1e-8")
        if p.min() < -1e-10:
            raise ValueError(f"negative population {p.min():.3e}")
        n_max = (rho.shape[0] - 1) // 2
        return cls(time, np.arange(-n_max, n_max + 1), p, hbar)


@dataclass(frozen=True)
class Peak:
    position: float
    height: float
    mass: float
    width: float


def find_peaks(centers: np.ndarray, weights: np.ndarray,
               background_factor: float = 3.0,
               min_height: float = 0.0) -> list[Peak]:
    """Local maxima exceeding background_factor * median, widths at half max.

    min_height is an absolute floor on the peak height; distributions with
    near-empty tails have a tiny median, so morphology questions ("is there a
    peak at the cycle level?") should pass e.g. 1% of the distribution maximum
    to avoid promoting background ripples to peaks.
    """
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    threshold = max(background_factor * np.median(weights), min_height)
    peaks = []
    for i in range(1, weights.size - 1):
        w = weights[i]
        if w <= threshold or w <= 0:
            continue
        if not (w > weights[i - 1] and w >= weights[i + 1]):
            continue
        half = 0.5 * w
        li = i
        while li > 0 and weights[li - 1] > half:
            li -= 1
        ri = i
        while ri < weights.size - 1 and weights[ri + 1] > half:
            ri += 1

        def cross(j, k):
            # linear interpolation of the half-max crossing between bins j, k
            wj, wk = weights[j], weights[k]
            if wj == wk:
                return centers[j]
            f = (half - wj) / (wk - wj)
            return centers[j] + f * (centers[k] - centers[j])

        left = cross(li, li - 1) if li > 0 else centers[0]
        right = cross(ri, ri + 1) if ri < weights.size - 1 else centers[-1]
        peaks.append(Peak(float(centers[i]), float(w),
                          float(weights[li:ri + 1].sum()),
                          float(right - left)))
    return peaks


def asymmetry(centers: np.ndarray, weights: np.ndarray) -> float:
    """Total mass at I > 0 minus total mass at I < 0."""
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    return float(weights[centers > 0].sum() - weights[centers < 0].sum())


def region_masses(centers: np.ndarray, weights: np.ndarray, delta_i: float):
    """(mass below -delta_i/2, middle mass, mass above +delta_i/2)."""
    centers = np.asarray(centers, dtype=float)
    weights = np.asarray(weights, dtype=float)
    half = 0.5 * delta_i
    lo = float(weights[centers < -half].sum())
    hi = float(weights[centers > half].sum())
    mid = float(weights[(centers >= -half) & (centers <= half)].sum())
    return lo, mid, hi


@dataclass(frozen=True)
class DistributionReport:
    quantum_peaks: list
    classical_peaks: list
    quantum_regions: tuple
    classical_regions: tuple
    quantum_asymmetry: float
    classical_asymmetry: float


def compare_distributions(q: DistributionSnapshot, c, delta_i: float,
                          background_factor: float = 3.0) -> DistributionReport:
    """Side-by-side peak/region/asymmetry report; c = (I_centers, weights)."""
    c_centers, c_weights = (np.asarray(a, dtype=float) for a in c)
    return DistributionReport(
        quantum_peaks=find_peaks(q.actions, q.populations, background_factor),
        classical_peaks=find_peaks(c_centers, c_weights, background_factor),
        quantum_regions=region_masses(q.actions, q.populations, delta_i),
        classical_regions=region_masses(c_centers, c_weights, delta_i),
        quantum_asymmetry=asymmetry(q.actions, q.populations),
        classical_asymmetry=asymmetry(c_centers, c_weights),
    )


@dataclass(frozen=True)
class GapComparison:
    gap_a: float
    gap_b: float
    ratio: float


def relaxation_rate_comparison(spec_a: SpectralDecomposition,
                               spec_b: SpectralDecomposition) -> GapComparison:
    """Ratio of Floquet spectral gaps 1 - |lambda_1| (a over b)."""
    gap_a = 1.0 - abs(spec_a.eigenvalues[1])
    gap_b = 1.0 - abs(spec_b.eigenvalues[1])
    return GapComparison(float(gap_a), float(gap_b), float(gap_a / gap_b))
