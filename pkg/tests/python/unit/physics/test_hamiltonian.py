"""Tests for hopping kernels, interaction terms and Hamiltonian builders."""

from unittest.mock import patch

import numpy as np
import pytest

from tracial_lab.physics.car import (
    Boundary,
    LatticeSpec,
    annihilator_matrices,
    commutator,
    jw_annihilator,
    number_density,
    number_operator,
    operator_norm,
    translation_unitary,
)
from tracial_lab.physics.exceptions import (
    GaugeInvarianceError,
    KernelConjugacyError,
    PositionSumError,
    PreconditionError,
    SiteIndexError,
)
from tracial_lab.physics.hamiltonian import (
    GGETerm,
    HamiltonianSpec,
    HoppingKernel,
    InteractionTerm,
    build_gge,
    build_hamiltonian,
    build_interaction,
    build_quasifree,
    default_benchmark,
    density_density_orbit,
    dispersion,
    pair_scattering_term,
    max_group_velocity,
    parse_gge_term,
    parse_interaction_term,
    single_particle_matrix,
    translation_orbit,
)


def _hermitian(M):
    return np.allclose(M, M.conj().T, atol=1e-12)


def _position_sum(lattice):
    """G = sum_x x n_x."""
    return sum(x * number_density(x, lattice).matrix for x in lattice.sites)


@pytest.mark.unit
class TestHoppingKernel:
    """Tests for kernel construction and the conjugacy condition."""

    def test_from_pairs_completes_conjugates(self):
        kernel = HoppingKernel.from_pairs({1: 1 + 1j, 0: 0.5})
        assert kernel[-1] == pytest.approx(1 - 1j)
        assert kernel[0] == pytest.approx(0.5)
        kernel.validate()

    def test_one_sided_kernel_rejected(self):
        with pytest.raises(KernelConjugacyError):
            HoppingKernel({1: 1.0}).validate()

    def test_missing_displacement_is_zero(self):
        assert HoppingKernel.nearest_neighbor()[3] == 0

    def test_hashable(self):
        assert hash(HoppingKernel.onsite(0.5)) == hash(HoppingKernel({0: 0.5}))

    def test_single_particle_matrix_boundaries(self):
        """The ring folds d = -3 onto d = 1; the open chain does not."""
        kernel = HoppingKernel.nearest_neighbor(1.0)
        ring = single_particle_matrix(kernel, LatticeSpec(4, Boundary.PERIODIC))
        chain = single_particle_matrix(kernel, LatticeSpec(4, Boundary.OPEN))
        assert ring[0, 3] == 1.0
        assert chain[0, 3] == 0.0
        assert chain[1, 0] == 1.0

    def test_dispersion_nearest_neighbor(self):
        np.testing.assert_allclose(dispersion(HoppingKernel.nearest_neighbor(), 4), [2, 0, -2, 0], atol=1e-12)

    def test_max_group_velocity(self):
        assert max_group_velocity(HoppingKernel.nearest_neighbor(1.0)) == pytest.approx(2.0, rel=1e-6)
        assert max_group_velocity(HoppingKernel.onsite(3.0)) == 0.0


@pytest.mark.unit
class TestInteractionTerm:
    """Tests for position-sum conservation and term matrices."""

    def test_counts_must_match(self, open3):
        with pytest.raises(GaugeInvarianceError):
            InteractionTerm((0, 1), (1,)).validate_for(open3)

    def test_open_chain_position_sum(self, open3):
        with pytest.raises(PositionSumError):
            InteractionTerm((0, 1), (0, 0)).validate_for(open3)
        InteractionTerm((0, 2), (1, 1)).validate_for(open3)

    def test_ring_position_sum_mod_L(self):
        """2 + 2 = 4 = 0 + 1 mod 3 conserves on a three-site ring only."""
        term = InteractionTerm((2, 2), (0, 1))
        term.validate_for(LatticeSpec(3, Boundary.PERIODIC))
        with pytest.raises(PositionSumError):
            term.validate_for(LatticeSpec(3, Boundary.OPEN))

    def test_site_range_checked(self, open3):
        with pytest.raises(SiteIndexError):
            InteractionTerm((0, 3), (3, 0)).validate_for(open3)

    def test_pair_scattering_term_completes_fourth_site(self, open4):
        """a*_x a*_y a_z a_{x+y-z}."""
        term = pair_scattering_term(0, 3, 1, 0.5, open4)
        assert term.annihilators == (1, 2)
        assert term.coefficient == 0.5

    def test_pair_scattering_term_off_chain(self, open3):
        with pytest.raises(SiteIndexError):
            pair_scattering_term(0, 0, 1, 1.0, open3)

    def test_pair_scattering_term_wraps_on_ring(self, ring4):
        assert pair_scattering_term(0, 0, 1, 1.0, ring4).annihilators == (1, 3)

    def test_density_density_is_not_doubled(self, open3):
        """A self-adjoint term contributes c n_x n_y exactly once."""
        V = build_interaction([InteractionTerm((0, 1), (1, 0), 2.0)], open3)
        expected = 2.0 * (number_density(0, open3) @ number_density(1, open3)).matrix
        np.testing.assert_allclose(V.matrix, expected, atol=1e-12)

    def test_non_self_adjoint_term_gets_adjoint(self, open4):
        V = build_interaction([InteractionTerm((0, 3), (1, 2), 0.7j)], open4)
        a = [jw_annihilator(x, open4) for x in open4.sites]
        T = 0.7j * (a[0].H @ a[3].H @ a[1] @ a[2]).matrix
        np.testing.assert_allclose(V.matrix, T + T.conj().T, atol=1e-12)
        assert np.linalg.norm(V.matrix) > 0
        assert operator_norm(commutator(V, number_operator(open4))) < 1e-12

    def test_conserving_interaction_commutes_with_position_sum(self, open4):
        terms = [*density_density_orbit(open4), InteractionTerm((0, 3), (1, 2), 0.7j)]
        V = build_interaction(terms, open4).matrix
        G = _position_sum(open4)
        assert np.linalg.norm(V @ G - G @ V, 2) < 1e-12

    def test_non_conserving_interaction_moves_position_sum(self, open4):
        V = build_interaction([InteractionTerm((0, 1), (1, 2))], open4, validate=False).matrix
        G = _position_sum(open4)
        assert np.linalg.norm(V @ G - G @ V, 2) > 0.5

    def test_validate_false_allows_non_conserving(self, open3):
        """The unvalidated path still requires equal counts."""
        V = build_interaction([InteractionTerm((0, 1), (1, 2))], open3, validate=False)
        assert _hermitian(V.matrix)
        with pytest.raises(PositionSumError):
            build_interaction([InteractionTerm((0, 1), (1, 2))], open3)
        with pytest.raises(GaugeInvarianceError):
            build_interaction([InteractionTerm((0,), (1, 2))], open3, validate=False)

    def test_vanishing_term_logged(self, open3):
        """a_1 a_1 = 0, so the term is dropped with a warning."""
        with patch("tracial_lab.physics.hamiltonian.logger") as log:
            V = build_interaction([InteractionTerm((0, 2), (1, 1))], open3)
        assert np.linalg.norm(V.matrix) == 0
        log.warning.assert_called_once()


@pytest.mark.unit
class TestOrbits:
    def test_open_orbit_keeps_in_range_translates(self, open4):
        assert len(density_density_orbit(open4)) == 3

    def test_ring_orbit(self, ring4):
        orbit = density_density_orbit(ring4)
        assert len(orbit) == 4
        assert InteractionTerm((3, 0), (0, 3)) in orbit

    def test_ring_orbit_counts_every_shift(self, ring4):
        assert len(translation_orbit(InteractionTerm((0, 2), (2, 0)), ring4)) == 4


@pytest.mark.unit
class TestGGE:
    def test_single_site_string_is_l_minus_2n(self, open3):
        """sum_x (1 - 2 n_x) = L - 2N."""
        G = build_gge([GGETerm((0,), 1.0)], open3)
        expected = 3 * np.eye(8) - 2 * number_operator(open3).matrix
        np.testing.assert_allclose(G.matrix, expected, atol=1e-12)

    def test_empty_subset_rejected(self):
        with pytest.raises(PreconditionError):
            GGETerm(())

    def test_complex_coefficient_rejected(self):
        with pytest.raises(PreconditionError):
            GGETerm((0,), 1j)

    def test_mode_path_matches_occupation_path(self, open4):
        """Building through explicit modes reproduces the diagonal GGE."""
        spec = HamiltonianSpec(
            open4, HoppingKernel.nearest_neighbor(0.5), gge_terms=(GGETerm((0, 1), 0.3), GGETerm((0,), -1.0)),
        )
        direct = build_hamiltonian(spec).matrix
        via_modes = build_hamiltonian(spec, annihilator_matrices(4)).matrix
        np.testing.assert_allclose(direct, via_modes, atol=1e-12)


@pytest.mark.unit
class TestBuildHamiltonian:
    def test_quasifree_is_hermitian_and_conserves_n(self, ring4):
        H0 = build_quasifree(HoppingKernel.from_pairs({1: 0.4 + 0.3j, 0: 0.2}), ring4)
        assert _hermitian(H0.matrix)
        assert operator_norm(commutator(H0, number_operator(ring4))) < 1e-12

    def test_quasifree_one_particle_sector(self, open3):
        """On single-particle states dGamma(h) acts as h."""
        h = single_particle_matrix(HoppingKernel.nearest_neighbor(1.0, 0.3), open3)
        H0 = build_quasifree(HoppingKernel.nearest_neighbor(1.0, 0.3), open3).matrix
        one_particle = [0b100, 0b010, 0b001]
        np.testing.assert_allclose(H0[np.ix_(one_particle, one_particle)], h, atol=1e-12)

    def test_benchmark(self, open4):
        spec = default_benchmark(open4)
        assert not spec.is_quadratic
        assert spec.quasifree_part().is_quadratic
        H = build_hamiltonian(spec)
        assert H.label == "H"
        assert _hermitian(H.matrix)
        assert operator_norm(commutator(H, number_operator(open4))) < 1e-12

    def test_ring_benchmark_is_translation_invariant(self, ring4):
        S = translation_unitary(ring4).matrix
        H = build_hamiltonian(default_benchmark(ring4)).matrix
        np.testing.assert_allclose(S @ H @ S.conj().T, H, atol=1e-12)

    def test_single_translate_breaks_translation_invariance(self, ring4):
        spec = HamiltonianSpec(ring4, HoppingKernel.nearest_neighbor(), (InteractionTerm((0, 1), (1, 0)),))
        S = translation_unitary(ring4).matrix
        H = build_hamiltonian(spec).matrix
        assert np.linalg.norm(S @ H @ S.conj().T - H, 2) > 0.5

    def test_validation_runs_by_default(self, open3):
        spec = HamiltonianSpec(open3, interactions=(InteractionTerm((0, 1), (1, 2)),))
        with pytest.raises(PositionSumError):
            build_hamiltonian(spec)
        build_hamiltonian(spec, validate=False)

    def test_digest_depends_on_lattice(self):
        a = default_benchmark(LatticeSpec(3, Boundary.OPEN))
        b = default_benchmark(LatticeSpec(3, Boundary.PERIODIC))
        assert a.digest() != b.digest()
        assert a.digest() == default_benchmark(LatticeSpec(3, Boundary.OPEN)).digest()

    def test_to_text_sections(self, open3):
        spec = HamiltonianSpec(
            open3, HoppingKernel.nearest_neighbor(), (InteractionTerm((0, 1), (1, 0)),), (GGETerm((0,), 1.0),),
        )
        text = spec.to_text()
        assert "[kernel]" in text
        assert "[interaction]" in text
        assert "[gge]" in text


@pytest.mark.unit
class TestParsing:
    def test_interaction_term(self):
        term = parse_interaction_term("0,1 | 1,0 | 2.5")
        assert term == InteractionTerm((0, 1), (1, 0), 2.5)

    def test_interaction_term_default_coefficient(self):
        assert parse_interaction_term("0 | 0").coefficient == 1.0

    def test_interaction_term_complex_coefficient(self):
        assert parse_interaction_term("0,3 | 1,2 | 1+2j").coefficient == 1 + 2j

    def test_gge_term(self):
        assert parse_gge_term("0,1 | 0.5") == GGETerm((0, 1), 0.5)

    @pytest.mark.parametrize("text", ["0 | 1 | 2 | 3", ""])
    def test_malformed_interaction(self, text):
        with pytest.raises(ValueError):
            parse_interaction_term(text)
