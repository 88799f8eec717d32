import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from support import random_density
from drm import quantum, superop
from drm.model import ModelParams
from drm.quantum import MomentumBasis
from drm.superop import (HERM, LIOUVILLIAN, VEC, SuperOperator, build_liouvillian,
                         devectorize, diagonalize, floquet_operator,
                         herm_to_vec_transform, to_vec_rep, trace_functional,
                         vectorize)


def spectral_distance(a, b):
    """Pairing-robust max distance between two spectra."""
    return max(np.min(np.abs(b - x)) for x in a)


PARAMS = ModelParams(omega=2.1, gamma=0.25, hbar=0.5)
BASIS = MomentumBasis(5)


@pytest.fixture(scope="module")
def floq_herm():
    return floquet_operator(BASIS, PARAMS, steps_per_period=256, rep=HERM)


@pytest.fixture(scope="module")
def floq_vec(floq_herm):
    return to_vec_rep(floq_herm)


@pytest.fixture(scope="module")
def floq_dec(floq_herm):
    return diagonalize(floq_herm)


class TestVectorization:
    def test_column_major_example(self):
        rho = np.array([[1.0, 3.0], [2.0, 4.0]])
        assert np.array_equal(vectorize(rho), [1.0, 2.0, 3.0, 4.0])

    def test_roundtrip(self, rng):
        rho = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        assert np.array_equal(devectorize(vectorize(rho)), rho)

    def test_errors(self):
        with pytest.raises(ValueError, match="square"):
            vectorize(np.zeros((2, 3)))
        with pytest.raises(ValueError, match="vector"):
            devectorize(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="perfect square"):
            devectorize(np.zeros(5))


class TestHermBasis:
    N = 5

    def test_orthonormal_and_complete(self):
        ks, ms = superop._pair_indices(self.N)
        els = superop.herm_basis_chunk(np.arange(self.N * self.N), self.N, ks, ms)
        gram = np.einsum("aij,bij->ab", els, els.conj())
        assert np.allclose(gram, np.eye(self.N * self.N), atol=1e-14)
        for el in els:
            assert np.allclose(el, el.conj().T, atol=1e-15)

    def test_coords_roundtrip(self, rng):
        ks, ms = superop._pair_indices(self.N)
        rho = random_density(rng, self.N)
        v = superop.coords_from_matrices(rho[None], ks, ms)[:, 0]
        back = superop.matrix_from_coords(v, ks, ms, self.N)
        assert np.max(np.abs(back - rho)) < 1e-14

    def test_transform_is_unitary(self):
        m = herm_to_vec_transform(self.N)
        prod = (m.conj().T @ m).toarray()
        assert np.allclose(prod, np.eye(self.N * self.N), atol=1e-14)

    def test_transform_maps_coords_to_vec(self, rng):
        ks, ms = superop._pair_indices(self.N)
        rho = random_density(rng, self.N)
        v = superop.coords_from_matrices(rho[None], ks, ms)[:, 0]
        m = herm_to_vec_transform(self.N)
        assert np.max(np.abs(m @ v - vectorize(rho))) < 1e-14

    def test_trace_functional_both_reps(self, rng):
        rho = random_density(rng, self.N)
        w_vec = trace_functional(self.N, VEC)
        assert w_vec @ vectorize(rho) == pytest.approx(1.0, abs=1e-12)
        ks, ms = superop._pair_indices(self.N)
        v = superop.coords_from_matrices(rho[None], ks, ms)[:, 0]
        w_herm = trace_functional(self.N, HERM)
        assert w_herm @ v == pytest.approx(1.0, abs=1e-12)


class TestLiouvillian:
    def test_matches_master_rhs(self, rng):
        p = ModelParams(omega=2.1, gamma=0.25, hbar=0.5, v_minus=0.35)
        b = MomentumBasis(4)
        op = build_liouvillian(0.63, b, p)
        for _ in range(20):
            rho = random_density(rng, b.size)
            lhs = op.matrix @ vectorize(rho)
            rhs = vectorize(quantum.master_rhs(rho, 0.63, p))
            assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_unitary_part_antihermitian_spectrum(self):
        p = ModelParams(omega=2.1, gamma=0.0, hbar=0.5)
        op = build_liouvillian(0.2, MomentumBasis(4), p)
        eigs = np.linalg.eigvals(op.matrix)
        assert np.max(np.abs(eigs.real)) < 1e-9

    def test_trace_is_left_null_vector(self):
        p = ModelParams(omega=2.1, gamma=0.3, hbar=0.5)
        b = MomentumBasis(4)
        op = build_liouvillian(0.1, b, p)
        w = trace_functional(b.size, VEC)
        assert np.max(np.abs(w @ op.matrix)) < 1e-10

    def test_real_rep_matches_complex_rhs(self, rng):
        # time-independent H with custom diagonal: compare the batched real
        # generator column-by-column against a directly assembled rhs
        p = ModelParams(omega=4.0, gamma=0.15, hbar=0.5)
        b = MomentumBasis(3)
        n = b.size
        diag = 0.5 * p.g * p.hbar**2 * b.levels.astype(float) ** 2 \
            - p.hbar * p.omega * b.levels
        coupling = -0.5 * p.v_plus
        gen = superop.real_rep_generator(diag, coupling, p)
        h = np.diag(diag).astype(complex)
        idx = np.arange(n - 1)
        h[idx + 1, idx] = coupling
        h[idx, idx + 1] = np.conj(coupling)
        ks, ms = superop._pair_indices(n)
        for _ in range(5):
            rho = random_density(rng, n)
            rhs = (-1j / p.hbar * (h @ rho - rho @ h)
                   + quantum.apply_dissipators(rho, p))
            v = superop.coords_from_matrices(rho[None], ks, ms)[:, 0]
            got = superop.matrix_from_coords(gen @ v, ks, ms, n)
            assert np.max(np.abs(got - rhs)) < 1e-12

    def test_real_rep_trace_left_null(self):
        p = ModelParams(omega=4.0, gamma=0.15, hbar=0.5)
        b = MomentumBasis(3)
        diag = 0.5 * p.g * p.hbar**2 * b.levels.astype(float) ** 2
        gen = superop.real_rep_generator(diag, -0.5, p)
        w = trace_functional(b.size, HERM)
        assert np.max(np.abs(w @ gen)) < 1e-10


class TestFloquetOperator:
    def test_matches_single_state_evolution(self, floq_vec, rng):
        rho0 = random_density(rng, BASIS.size)
        traj = quantum.evolve(rho0, (0.0, PARAMS.period), PARAMS,
                              steps_per_period=256, boundary_tol=2.0)
        lhs = devectorize(floq_vec.matrix @ vectorize(rho0))
        assert np.max(np.abs(lhs - traj.states[-1])) < 1e-12

    def test_rep_equivalence(self, floq_herm, floq_vec):
        a = np.linalg.eigvals(floq_herm.matrix)
        b = np.linalg.eigvals(floq_vec.matrix)
        assert spectral_distance(a, b) < 1e-9

    def test_free_damped_chain_through_propagator(self):
        # V = 0: one-period propagator must reproduce the loss-cascade
        # closed form after m applications
        p = ModelParams(v_plus=0.0, v_minus=0.0, omega=4.0, gamma=0.3, hbar=0.5)
        b = MomentumBasis(6)
        op = floquet_operator(b, p, steps_per_period=256)
        import oracles
        n0 = 4
        rho = np.zeros((b.size, b.size), dtype=complex)
        rho[n0 + b.n_max, n0 + b.n_max] = 1.0
        v = vectorize(rho)
        for _ in range(3):
            v = op.matrix @ v
        pops = np.real(np.diag(devectorize(v)))
        expected = oracles.death_chain_populations(n0, 3 * p.period, p.gamma)
        assert np.max(np.abs(pops[b.n_max: b.n_max + n0 + 1] - expected)) < 1e-8

    def test_free_undamped_is_diagonal_phase_matrix(self):
        p = ModelParams(v_plus=0.0, v_minus=0.0, omega=4.0, gamma=0.0, hbar=0.5)
        b = MomentumBasis(3)
        op = floquet_operator(b, p, steps_per_period=512)
        e = 0.5 * p.g * p.hbar**2 * b.levels.astype(float) ** 2
        phases = np.exp(-1j * (e[:, None] - e[None, :]) * p.period / p.hbar)
        expected = np.diag(vectorize(phases))
        assert np.max(np.abs(op.matrix - expected)) < 1e-9

    def test_undamped_eigenvalues_on_unit_circle(self):
        p = ModelParams(omega=4.0, gamma=0.0, hbar=0.5)
        op = floquet_operator(MomentumBasis(4), p, steps_per_period=512)
        eigs = np.linalg.eigvals(op.matrix)
        assert np.max(np.abs(np.abs(eigs) - 1.0)) < 1e-8

    def test_convergence_gate_accepts_fine_step(self):
        p = ModelParams(omega=4.0, gamma=0.1, hbar=0.5)
        floquet_operator(MomentumBasis(3), p, steps_per_period=512,
                         check_convergence=True)

    def test_convergence_gate_rejects_coarse_step(self):
        p = ModelParams(omega=1.6, gamma=0.1, hbar=0.5)
        with pytest.raises(RuntimeError, match="not converged"):
            floquet_operator(MomentumBasis(3), p, steps_per_period=3,
                             check_convergence=True)


class TestSpectralDecomposition:
    def test_leading_eigenvalue_is_one(self, floq_dec):
        assert abs(floq_dec.eigenvalues[0] - 1.0) < 1e-10

    def test_spectrum_inside_unit_disk(self, floq_dec):
        assert np.max(np.abs(floq_dec.eigenvalues)) <= 1.0 + 1e-8

    def test_conjugation_symmetry(self, floq_dec):
        e = floq_dec.eigenvalues
        assert spectral_distance(e, e.conj()) < 1e-9

    def test_residuals_small(self, floq_dec):
        assert floq_dec.residuals is not None
        assert np.max(floq_dec.residuals) < 1e-8

    def test_stationary_state_is_fixed_point_and_positive(self, floq_dec, floq_vec):
        rho_inf = floq_dec.eigenmatrices[0]
        assert np.trace(rho_inf) == pytest.approx(1.0, abs=1e-12)
        after = devectorize(floq_vec.matrix @ vectorize(rho_inf))
        assert np.max(np.abs(after - rho_inf)) < 1e-9
        assert np.linalg.eigvalsh(0.5 * (rho_inf + rho_inf.conj().T)).min() > -1e-8

    def test_decaying_mode_normalization(self, floq_dec):
        for j in (1, 2, 3):
            m = floq_dec.eigenmatrices[j]
            assert abs(np.trace(m)) < 1e-8
            assert np.linalg.norm(m) == pytest.approx(1.0, abs=1e-10)
            lead = m.flat[np.argmax(np.abs(m))]
            assert lead.imag == pytest.approx(0.0, abs=1e-10)
            assert lead.real > 0

    def test_n_matrices_limit(self, floq_herm):
        dec = diagonalize(floq_herm, n_matrices=3)
        assert dec.eigenmatrices.shape[0] == 3

    def test_values_only(self, floq_herm, floq_dec):
        dec = diagonalize(floq_herm, values_only=True)
        assert dec.eigenmatrices is None and dec.residuals is None
        assert np.allclose(dec.eigenvalues, floq_dec.eigenvalues, atol=1e-12)

    def test_size_budget_enforced(self):
        p = ModelParams(omega=4.0, gamma=0.1)
        op = build_liouvillian(0.0, MomentumBasis(1), p)
        with pytest.raises(ValueError, match="size budget"):
            diagonalize(op, size_budget=8)

    def test_nonnegligible_trace_in_decaying_mode_rejected(self):
        # a diagonal "propagator" whose subleading mode carries trace must be
        # refused by the normalization step
        mat = np.diag([0.9, 0.8, 0.8, 1.0]).astype(complex)
        fake = SuperOperator(mat, VEC, superop.FLOQUET,
                             type("B", (), {"size": 2, "n_max": 0})(), period=1.0)
        with pytest.raises(RuntimeError, match="trace"):
            diagonalize(fake)

    def test_floquet_sort_order(self):
        eigs = np.array([0.5, 0.9 - 0.1j, -1.0, 1.0, 0.9 + 0.1j])
        order = superop._sort_order(eigs, superop.FLOQUET)
        assert np.array_equal(eigs[order],
                              [1.0, -1.0, 0.9 + 0.1j, 0.9 - 0.1j, 0.5])

    def test_liouvillian_sort_order(self):
        eigs = np.array([-0.1 - 2j, -0.5, 0.0, -0.1, -0.1 + 2j])
        order = superop._sort_order(eigs, LIOUVILLIAN)
        assert np.array_equal(eigs[order],
                              [0.0, -0.1, -0.1 + 2j, -0.1 - 2j, -0.5])


@given(st.integers(2, 6), st.integers(0, 10_000))
def test_vectorize_roundtrip_property(n, seed):
    rho = np.random.default_rng(seed).normal(size=(n, n))
    assert np.array_equal(devectorize(vectorize(rho)), rho)
