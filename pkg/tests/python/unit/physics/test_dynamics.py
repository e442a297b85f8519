"""Tests for Heisenberg evolution, invariant means and Bohr spectra."""

import numpy as np
import pytest

from tracial_lab.physics.car import (
    Boundary,
    FockOperator,
    LatticeSpec,
    SmearingVector,
    commutator,
    jw_annihilator,
    number_density,
    operator_norm,
    smeared_annihilator,
)
from tracial_lab.physics.dynamics import (
    TracialState,
    VectorState,
    bessel_amplitudes,
    cesaro_mean,
    cluster_energies,
    correlation_spectrum,
    eigendecompose,
    eta_mean,
    heisenberg,
    heisenberg_series,
    quasifree_heisenberg,
    quasifree_smearing,
    single_particle_propagator,
    suggest_t_max,
)
from tracial_lab.physics.exceptions import PreconditionError, ShapeError
from tracial_lab.physics.hamiltonian import (
    HoppingKernel,
    build_hamiltonian,
    build_quasifree,
    default_benchmark,
    single_particle_matrix,
)


@pytest.fixture()
def benchmark_eig(open3):
    return eigendecompose(build_hamiltonian(default_benchmark(open3)))


@pytest.mark.unit
class TestEigendecompose:
    """Tests for the spectral decomposition."""

    def test_reconstructs_h(self, open3):
        H = build_hamiltonian(default_benchmark(open3))
        eig = eigendecompose(H)
        np.testing.assert_allclose(eig.reconstruct(), H.matrix, atol=1e-10)
        assert np.all(np.diff(eig.energies) >= 0)

    def test_rejects_non_hermitian(self, open3):
        with pytest.raises(PreconditionError):
            eigendecompose(jw_annihilator(0, open3))

    def test_cluster_energies(self):
        groups = cluster_energies(np.array([0.0, 0.0, 1.0, 1.0 + 1e-12, 3.0]), 1e-9)
        assert groups == ((0, 2), (2, 4), (4, 5))

    def test_propagator_is_unitary(self, benchmark_eig):
        U = benchmark_eig.propagator(0.7)
        np.testing.assert_allclose(U @ U.conj().T, np.eye(8), atol=1e-10)


@pytest.mark.unit
class TestHeisenberg:
    """Tests for tau_t A = e^{iHt} A e^{-iHt}."""

    def test_time_zero_is_identity(self, open3, benchmark_eig):
        a = jw_annihilator(1, open3)
        assert heisenberg(a, benchmark_eig, 0.0) is a

    def test_derivative_is_i_commutator(self, open3, benchmark_eig):
        """d/dt tau_t A = i[H, tau_t A]."""
        H = FockOperator(benchmark_eig.reconstruct(), open3)
        a = jw_annihilator(0, open3)
        t, h = 0.4, 1e-5
        forward = heisenberg(a, benchmark_eig, t + h).matrix
        backward = heisenberg(a, benchmark_eig, t - h).matrix
        derivative = (forward - backward) / (2 * h)
        expected = 1j * commutator(H, heisenberg(a, benchmark_eig, t)).matrix
        np.testing.assert_allclose(derivative, expected, atol=1e-7)

    def test_automorphism(self, open3, benchmark_eig):
        a = jw_annihilator(0, open3)
        n = number_density(2, open3)
        lhs = heisenberg(a @ n, benchmark_eig, 1.3).matrix
        rhs = heisenberg(a, benchmark_eig, 1.3).matrix @ heisenberg(n, benchmark_eig, 1.3).matrix
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    @pytest.mark.parametrize("t", [0.3, 1.7, -2.2])
    def test_commutator_norm_moves_evolution_across(self, open3, benchmark_eig, t):
        """||[tau_t A, B]|| = ||[A, tau_{-t} B]||."""
        A = jw_annihilator(0, open3)
        B = number_density(2, open3)
        lhs = operator_norm(commutator(heisenberg(A, benchmark_eig, t), B))
        rhs = operator_norm(commutator(A, heisenberg(B, benchmark_eig, -t)))
        assert lhs == pytest.approx(rhs, abs=1e-10)

    def test_series_matches_pointwise(self, open3, benchmark_eig):
        a = jw_annihilator(2, open3)
        series = heisenberg_series(a, benchmark_eig, [0.0, 0.5, 1.0])
        for t, M in zip([0.0, 0.5, 1.0], series, strict=True):
            np.testing.assert_allclose(M, heisenberg(a, benchmark_eig, t).matrix, atol=1e-12)

    def test_dimension_mismatch(self, benchmark_eig):
        with pytest.raises(ShapeError):
            heisenberg(jw_annihilator(0, LatticeSpec(2)), benchmark_eig, 1.0)


@pytest.mark.unit
class TestQuasifreeFastPath:
    """The single-particle propagator agrees with exact Fock-space evolution."""

    def test_matches_exact_evolution(self, open4, rng):
        kernel = HoppingKernel.from_pairs({1: 1.0, 0: 0.3, 2: 0.2j})
        h = single_particle_matrix(kernel, open4)
        eig = eigendecompose(build_quasifree(kernel, open4))
        f = rng.normal(size=4) + 1j * rng.normal(size=4)
        for t in (0.3, 1.7):
            exact = heisenberg(smeared_annihilator(f, open4), eig, t).matrix
            fast = quasifree_heisenberg(f, h, t, open4).matrix
            np.testing.assert_allclose(fast, exact, atol=1e-10)

    def test_norm_preserved(self, rng):
        h = single_particle_matrix(HoppingKernel.nearest_neighbor(), LatticeSpec(6))
        f = SmearingVector(rng.normal(size=6))
        assert quasifree_smearing(f, h, 2.0).norm == pytest.approx(f.norm)

    def test_bessel_limit(self):
        """Far from the boundary the ring propagator is |J_x(2t)|."""
        L, t = 64, 2.0
        h = single_particle_matrix(HoppingKernel.nearest_neighbor(), LatticeSpec(L, Boundary.PERIODIC))
        evolved = quasifree_smearing(SmearingVector.delta(0, L), h, t).coefficients
        xs = np.arange(0, 8)
        np.testing.assert_allclose(np.abs(evolved[xs]), bessel_amplitudes(xs, t), atol=1e-10)

    def test_propagator_rejects_non_hermitian(self):
        with pytest.raises(PreconditionError):
            single_particle_propagator(np.array([[0, 1], [0, 0]]), 1.0)

    def test_propagator_rejects_non_square(self):
        with pytest.raises(ShapeError):
            single_particle_propagator(np.zeros((2, 3)), 1.0)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            quasifree_smearing([1.0, 0.0], np.eye(3), 1.0)

    def test_suggest_t_max(self):
        assert suggest_t_max(8) == 2.0
        assert suggest_t_max(8, hopping=2.0) == 1.0
        assert suggest_t_max(8, hopping=0.0) == float("inf")


@pytest.mark.unit
class TestInvariantMeans:
    """Tests for the pinching and the Cesaro mean."""

    def test_eta_commutes_with_h(self, open3, benchmark_eig):
        H = FockOperator(benchmark_eig.reconstruct(), open3)
        m = eta_mean(jw_annihilator(0, open3) @ jw_annihilator(1, open3).H, benchmark_eig)
        assert operator_norm(commutator(H, m)) < 1e-7

    def test_eta_is_idempotent(self, open3, benchmark_eig):
        once = eta_mean(number_density(0, open3), benchmark_eig)
        twice = eta_mean(once, benchmark_eig)
        np.testing.assert_allclose(once.matrix, twice.matrix, atol=1e-12)

    def test_cesaro_fixes_conserved_quantities(self, open3, benchmark_eig):
        H = FockOperator(benchmark_eig.reconstruct(), open3)
        np.testing.assert_allclose(cesaro_mean(H, benchmark_eig, 3.0).matrix, H.matrix, atol=1e-10)

    def test_cesaro_approaches_eta(self, open3, benchmark_eig):
        A = number_density(0, open3)
        E, groups = benchmark_eig.energies, benchmark_eig.groups
        gap = min(E[nxt[0]] - E[prev[1] - 1] for prev, nxt in zip(groups, groups[1:], strict=False))
        T = 2000.0
        deviation = operator_norm(
            FockOperator(cesaro_mean(A, benchmark_eig, T).matrix - eta_mean(A, benchmark_eig).matrix, open3),
        )
        assert deviation <= 2.0 / (gap * T) * 8

    def test_cesaro_window_positive(self, open3, benchmark_eig):
        with pytest.raises(PreconditionError):
            cesaro_mean(number_density(0, open3), benchmark_eig, 0.0)


@pytest.mark.unit
class TestStatesAndSpectra:
    """Tests for the Bohr decomposition of two-point functions."""

    def test_vector_state_normalized(self):
        with pytest.raises(PreconditionError):
            VectorState(np.array([1.0, 1.0]))

    def test_tracial_state(self):
        assert TracialState(4).expect(np.eye(4)) == pytest.approx(1.0)

    def test_spectrum_reproduces_correlation(self, open3, benchmark_eig):
        """sum_k w_k e^{i omega_k t} = omega(A* tau_t B)."""
        psi = np.zeros(8, dtype=complex)
        psi[0b010] = 1.0
        A = jw_annihilator(1, open3)
        B = jw_annihilator(0, open3) @ number_density(2, open3) + A
        measure = correlation_spectrum(A, B, benchmark_eig, psi)
        for t in (0.0, 0.8, 2.5):
            tau_B = heisenberg(B, benchmark_eig, t).matrix
            direct = np.vdot(psi, A.matrix.conj().T @ tau_B @ psi)
            assert measure.evaluate([t])[0] == pytest.approx(direct, abs=1e-8)

    def test_autocorrelation_in_eigenstate_is_positive(self, open3, benchmark_eig):
        ground = benchmark_eig.vectors[:, 0]
        A = jw_annihilator(1, open3).H
        measure = correlation_spectrum(A, A, benchmark_eig, ground)
        assert measure.is_nonnegative()
        expected = np.vdot(ground, A.matrix.conj().T @ A.matrix @ ground)
        assert measure.total_weight == pytest.approx(expected, abs=1e-10)

    def test_tracial_state_spectrum(self, open3, benchmark_eig):
        A = number_density(0, open3)
        measure = correlation_spectrum(A, A, benchmark_eig, TracialState(8))
        assert measure.is_nonnegative()
        assert measure.total_weight == pytest.approx(0.5, abs=1e-12)
        assert len(measure.atoms) == len(measure.frequencies)
