"""Super-operator layer: vectorization, Liouvillian assembly, one-period
propagator, and dense non-Hermitian diagonalization.

Two equivalent representations are used:

* "vec": the textbook column-major vectorization, L and U as dense complex
  (N^2 x N^2) matrices.  This is the external contract.
* "herm": coordinates in the orthonormal Hermitian operator basis
  {E_kk} + {(E_km + E_mk)/sqrt2} + {i(E_km - E_mk)/sqrt2}.  The generator and
  propagator are then real matrices; a real eigensolve is ~2.5x faster and
  needs half the memory, which is what makes the larger lattices tractable.
  The change of basis is unitary, so spectra coincide exactly.

Propagator construction integrates all basis columns through one driving
period with the same fused RK4 kernel as quantum.evolve, in batches sized to
a memory budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .model import ModelParams
from .quantum import (MomentumBasis, build_hamiltonian, coupling_tables,
                      hermitize, propagate_batch, _rhs_kernel)

VEC = "vec"
HERM = "herm"
FLOQUET = "floquet"
LIOUVILLIAN = "liouvillian"

#: refuse dense eigensolves above this dimension (N^2), ~1.7 GB real matrix
SIZE_BUDGET = 16384

#: default scratch-buffer budget for batched propagation, bytes
BATCH_BUDGET = 1_500_000_000


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-major stacking: [[a, c], [b, d]] -> (a, b, c, d)."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"expected a vector, got shape {v.shape}")
    n = math.isqrt(v.size)
    if n * n != v.size:
        raise ValueError(f"vector length {v.size} is not a perfect square")
    return v.reshape((n, n), order="F")


@dataclass(frozen=True)
class SuperOperator:
    matrix: np.ndarray
    rep: str  # VEC or HERM
    kind: str  # FLOQUET or LIOUVILLIAN
    basis: MomentumBasis
    t: float | None = None
    period: float | None = None


@dataclass
class SpectralDecomposition:
    """Eigenpairs sorted per the documented convention.

    Floquet: descending |lambda|, ties by Re descending then Im >= 0 first.
    Liouvillian: descending Re, ties by |Im| ascending then Im >= 0 first.
    eigenmatrices[0] has unit trace; the rest are traceless, unit Frobenius
    norm, with the largest-magnitude entry rotated to the positive real axis.
    residuals holds ||op v_j - lambda_j v_j||_inf for the leading eigenpairs.
    """

    eigenvalues: np.ndarray
    eigenmatrices: np.ndarray | None
    residuals: np.ndarray | None
    kind: str
    basis: MomentumBasis


# ---------------------------------------------------------------------------
# Hermitian operator basis


def _pair_indices(n: int):
    return np.triu_indices(n, 1)


def herm_basis_chunk(indices: np.ndarray, n: int, ks, ms) -> np.ndarray:
    """Materialize basis elements by flat index (diagonals, then S, then A)."""
    p = ks.size
    out = np.zeros((indices.size, n, n), dtype=np.complex128)
    s2 = math.sqrt(0.5)
    for row, j in enumerate(indices):
        if j < n:
            out[row, j, j] = 1.0
        elif j < n + p:
            out[row, ks[j - n], ms[j - n]] = s2
            out[row, ms[j - n], ks[j - n]] = s2
        else:
            out[row, ks[j - n - p], ms[j - n - p]] = 1j * s2
            out[row, ms[j - n - p], ks[j - n - p]] = -1j * s2
    return out


def coords_from_matrices(x: np.ndarray, ks, ms) -> np.ndarray:
    """Hermitian-basis coordinates of a batch: (B, N, N) -> (N^2, B)."""
    n = x.shape[1]
    p = ks.size
    out = np.empty((n * n, x.shape[0]))
    dg = np.arange(n)
    out[:n, :] = x[:, dg, dg].real.T
    out[n:n + p, :] = math.sqrt(2.0) * x[:, ks, ms].real.T
    out[n + p:, :] = math.sqrt(2.0) * x[:, ks, ms].imag.T
    return out


def matrix_from_coords(v: np.ndarray, ks, ms, n: int) -> np.ndarray:
    """Inverse of coords_from_matrices for one coordinate vector.

    Also correct for complex v (eigenvectors of the real representation):
    the reconstruction is linear, no conjugation involved.
    """
    p = ks.size
    m = np.zeros((n, n), dtype=np.complex128)
    m[np.arange(n), np.arange(n)] = v[:n]
    s2 = math.sqrt(0.5)
    m[ks, ms] = s2 * (v[n:n + p] + 1j * v[n + p:])
    m[ms, ks] = s2 * (v[n:n + p] - 1j * v[n + p:])
    return m


def herm_to_vec_transform(n: int) -> scipy.sparse.csr_matrix:
    """Sparse unitary M with columns vec(B_j); vec coords = M @ herm coords."""
    ks, ms = _pair_indices(n)
    p = ks.size
    dim = n * n
    s2 = math.sqrt(0.5)
    rows, cols, vals = [], [], []
    dg = np.arange(n)
    rows += list(dg + n * dg)
    cols += list(range(n))
    vals += [1.0] * n
    # vec index of entry (i, j) is i + n*j
    rows += list(ks + n * ms) + list(ms + n * ks)
    cols += list(range(n, n + p)) * 2
    vals += [s2] * p + [s2] * p
    rows += list(ks + n * ms) + list(ms + n * ks)
    cols += list(range(n + p, n + 2 * p)) * 2
    vals += [1j * s2] * p + [-1j * s2] * p
    return scipy.sparse.csr_matrix(
        (np.array(vals, dtype=np.complex128), (rows, cols)), shape=(dim, dim))


# ---------------------------------------------------------------------------
# generators


def build_liouvillian(t: float, basis: MomentumBasis, params: ModelParams) -> SuperOperator:
    """Dense complex L(t) with L vec(rho) = vec(master_rhs(rho, t))."""
    n_sz = basis.size
    h = build_hamiltonian(t, basis, params)
    eye = np.eye(n_sz)
    mat = -1j / params.hbar * (np.kron(eye, h) - np.kron(h.T, eye))
    lv = basis.levels
    amp_dn = np.sqrt(np.maximum(lv, 0).astype(float))   # |n> -> |n-1>, n >= 1
    amp_up = np.sqrt(np.maximum(-lv, 0).astype(float))  # |n> -> |n+1>, n <= -1
    idx = np.arange(n_sz - 1)
    a_p = np.zeros((n_sz, n_sz))
    a_p[idx, idx + 1] = amp_dn[1:]
    a_m = np.zeros((n_sz, n_sz))
    a_m[idx + 1, idx] = amp_up[:-1]
    for a in (a_p, a_m):
        ata = a.T @ a
        mat += params.gamma * (np.kron(a, a)
                               - 0.5 * (np.kron(eye, ata) + np.kron(ata, eye)))
    return SuperOperator(mat, VEC, LIOUVILLIAN, basis, t=t)


def real_rep_generator(diag_energies: np.ndarray, coupling: complex,
                       params: ModelParams,
                       buffer_bytes: int = BATCH_BUDGET) -> np.ndarray:
    """Real HERM-representation Liouvillian for a time-independent H.

    H has the given diagonal, constant nearest-neighbour coupling
    <n+1|H|n> = coupling, plus the standard dissipators of the model.
    """
    n_sz = diag_energies.size
    n_max = (n_sz - 1) // 2
    dim = n_sz * n_sz
    _, loss, wp, wm = coupling_tables(n_max, params)
    dd = (diag_energies[:, None] - diag_energies[None, :]) / params.hbar
    c1 = -1j * coupling / params.hbar
    c2 = -1j * np.conj(coupling) / params.hbar
    ks, ms = _pair_indices(n_sz)
    out = np.empty((dim, dim), order="F")
    batch = max(16, min(dim, int(buffer_bytes // (3 * 16 * dim))))
    for start in range(0, dim, batch):
        idx = np.arange(start, min(start + batch, dim))
        x = herm_basis_chunk(idx, n_sz, ks, ms)
        rates = np.empty_like(x)
        acc = np.empty_like(x)
        _rhs_kernel(rates, acc, 0.0, True, x, 0.0, dd, wp, wm, loss,
                    c1.real, c1.imag, c2.real, c2.imag, x)
        out[:, idx] = coords_from_matrices(rates, ks, ms)
    return out


# ---------------------------------------------------------------------------
# propagator


def floquet_operator(basis: MomentumBasis, params: ModelParams,
                     steps_per_period: int = 512, rep: str = VEC,
                     buffer_bytes: int = BATCH_BUDGET,
                     check_convergence: bool = False, conv_tol: float = 1e-5,
                     seed: int = 0) -> SuperOperator:
    """One-period propagator U with U vec(rho(0)) = vec(rho(T)).

    Always built in the HERM representation (batched RK4 over all basis
    columns); rep=VEC converts at the end through the sparse unitary basis
    change.  check_convergence re-runs a few random states at half the step
    and errors out if they disagree beyond conv_tol.
    """
    n_sz = basis.size
    dim = n_sz * n_sz
    ks, ms = _pair_indices(n_sz)
    dt = params.period / steps_per_period
    u_real = np.empty((dim, dim), order="F")
    batch = max(16, min(dim, int(buffer_bytes // (4 * 16 * dim))))
    for start in range(0, dim, batch):
        idx = np.arange(start, min(start + batch, dim))
        x = herm_basis_chunk(idx, n_sz, ks, ms)
        propagate_batch(x, 0.0, steps_per_period, dt, params)
        hermitize(x)
        u_real[:, idx] = coords_from_matrices(x, ks, ms)

    if check_convergence:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(3):
            a = rng.normal(size=(n_sz, n_sz)) + 1j * rng.normal(size=(n_sz, n_sz))
            rho = a @ a.conj().T
            rho /= np.trace(rho).real
            coarse = propagate_batch(rho[None].copy(), 0.0, steps_per_period,
                                     dt, params, herm_every=1)[0]
            fine = propagate_batch(rho[None].copy(), 0.0, 2 * steps_per_period,
                                   0.5 * dt, params, herm_every=1)[0]
            worst = max(worst, float(np.max(np.abs(coarse - fine))))
        if not worst <= conv_tol:  # NaN-safe
            raise RuntimeError(
                f"propagator not converged: step-halving residual {worst:.3e} "
                f"> {conv_tol:.0e} at {steps_per_period} steps/period")

    if rep == HERM:
        return SuperOperator(u_real, HERM, FLOQUET, basis, period=params.period)
    m = herm_to_vec_transform(n_sz)
    b = m @ u_real  # dense complex
    u_vec = (m @ b.conj().T).conj().T
    return SuperOperator(u_vec, VEC, FLOQUET, basis, period=params.period)


def to_vec_rep(op: SuperOperator) -> SuperOperator:
    if op.rep == VEC:
        return op
    m = herm_to_vec_transform(op.basis.size)
    b = m @ op.matrix
    return SuperOperator((m @ b.conj().T).conj().T, VEC, op.kind, op.basis,
                         t=op.t, period=op.period)


# ---------------------------------------------------------------------------
# diagonalization


def _sort_order(eigs: np.ndarray, kind: str) -> np.ndarray:
    if kind == FLOQUET:
        return np.lexsort((eigs.imag < 0, -eigs.real, -np.abs(eigs)))
    return np.lexsort((eigs.imag < 0, np.abs(eigs.imag), -eigs.real))


def _normalize_eigenmatrix(m: np.ndarray, leading: bool) -> np.ndarray:
    if leading:
        return m / np.trace(m)
    tr = np.trace(m)
    if abs(tr) > 1e-8 * np.linalg.norm(m):
        raise RuntimeError(f"decaying mode has non-negligible trace {tr:.3e}")
    m = m - (tr / m.shape[0]) * np.eye(m.shape[0])
    m = m / np.linalg.norm(m)
    k = np.argmax(np.abs(m))
    phase = m.flat[k] / abs(m.flat[k])
    return m / phase


def diagonalize(op: SuperOperator, kind: str | None = None,
                values_only: bool = False, n_matrices: int | None = None,
                n_residuals: int = 8, size_budget: int = SIZE_BUDGET,
                destroy: bool = False) -> SpectralDecomposition:
    """Full dense eigendecomposition, sorted and normalized as documented.

    n_matrices limits how many leading eigenmatrices are materialized (None =
    all).  destroy=True lets LAPACK overwrite op.matrix, saving one full copy
    on the largest lattices; the operator is unusable afterwards.
    """
    kind = kind or op.kind
    dim = op.matrix.shape[0]
    if dim > size_budget:
        raise ValueError(f"operator dimension {dim} exceeds size budget {size_budget}")
    n_sz = op.basis.size
    mat = op.matrix
    try:
        if values_only:
            eigs = scipy.linalg.eigvals(mat, overwrite_a=destroy, check_finite=False)
            vecs = None
        else:
            eigs, vecs = scipy.linalg.eig(mat, overwrite_a=destroy, check_finite=False)
    except Exception as exc:  # pragma: no cover - eigensolver failures are rare
        finite = np.all(np.isfinite(mat))
        scale = np.abs(mat).max() if finite else np.nan
        raise RuntimeError(
            f"eigensolver failed on {kind} operator (dim={dim}, finite={finite}, "
            f"max|entry|={scale:.3e}): {exc}") from exc
    order = _sort_order(eigs, kind)
    eigs = eigs[order]
    if vecs is None:
        return SpectralDecomposition(eigs, None, None, kind, op.basis)
    vecs = vecs[:, order]

    n_mat = dim if n_matrices is None else min(n_matrices, dim)
    residuals = None
    if not destroy:
        n_res = min(n_residuals, dim)
        residuals = np.empty(n_res)
        for j in range(n_res):
            v = vecs[:, j]
            residuals[j] = np.max(np.abs(op.matrix @ v - eigs[j] * v)) / np.max(np.abs(v))

    ks, ms = _pair_indices(n_sz)
    mats = np.empty((n_mat, n_sz, n_sz), dtype=np.complex128)
    for j in range(n_mat):
        if op.rep == HERM:
            m = matrix_from_coords(vecs[:, j], ks, ms, n_sz)
        else:
            m = devectorize(vecs[:, j])
        mats[j] = _normalize_eigenmatrix(m, leading=(j == 0))
    return SpectralDecomposition(eigs, mats, residuals, kind, op.basis)


def trace_functional(n: int, rep: str = VEC) -> np.ndarray:
    """Row vector w with w @ (rep coords of rho) = Tr rho."""
    if rep == VEC:
        return vectorize(np.eye(n)).astype(float)
    out = np.zeros(n * n)
    out[:n] = 1.0
    return out
