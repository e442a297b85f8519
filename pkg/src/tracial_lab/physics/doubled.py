"""The tracial state as the vacuum of a doubled Fermi algebra.

Modes A_0..A_{L-1} occupy indices 0..L-1 of a 2L-mode Jordan-Wigner chain and
B_0..B_{L-1} occupy L..2L-1, sharing one sign string. The physical modes are
the Bogoliubov images

    a(f) = (A(f) + B*(f-bar)) / sqrt(2),    b(f) = (A(f) - B*(f-bar)) / sqrt(2),

and the Fock vacuum Omega restricted to the a-algebra is the normalized
trace. Majorana monomials Gamma_S(a) are Hermitian and Gamma_S(a)Omega is an
orthonormal basis, so the modular conjugation x Omega -> x* Omega fixes every
basis vector. J is stored as a unitary M with J psi = M conj(psi).
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from tracial_lab.core.errors import ResourceLimitError
from tracial_lab.core.models import DEFAULTS
from tracial_lab.physics.car import (
    Boundary,
    CarPolynomial,
    ComplexArray,
    FockOperator,
    LatticeSpec,
    NormKind,
    Parity,
    SmearingVector,
    as_smearing,
    inner,
    jw_sparse,
    majorana,
    matrix_norm,
    parity_diagonal,
    smear,
    to_dense,
)
from tracial_lab.physics.dynamics import EigenSystem, eigendecompose, heisenberg, heisenberg_series
from tracial_lab.physics.exceptions import (
    ConsistencyError,
    GaugeInvarianceError,
    NumericalDegeneracyError,
    PreconditionError,
    ShapeError,
)
from tracial_lab.physics.hamiltonian import (
    HamiltonianSpec,
    build_hamiltonian,
    second_quantize,
    single_particle_matrix,
)

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)


def _spectral(M: ComplexArray) -> float:
    return matrix_norm(M, NormKind.SPECTRAL)


def _majoranas(modes: Sequence[Any]) -> list[Any]:
    out = []
    for m in modes:
        md = m.conj().T
        out += [m + md, 1j * (md - m)]
    return out


def _monomial_phase(S: int) -> complex:
    m = S.bit_count()
    return complex(1j ** (m * (m - 1) // 2))


def _lowest_bit(S: int) -> int:
    return (S & -S).bit_length() - 1


@dataclass(frozen=True, eq=False)
class AntiunitaryOperator:
    """J psi = M conj(psi); for linear X, J X J = M conj(X) conj(M)."""

    unitary: ComplexArray
    checks: Mapping[str, float] = field(default_factory=dict)

    def apply(self, psi: ArrayLike) -> ComplexArray:
        return self.unitary @ np.conj(np.asarray(psi, dtype=complex))

    def conjugate_matrix(self, X: ComplexArray) -> ComplexArray:
        return self.unitary @ np.conj(X) @ np.conj(self.unitary)

    def conjugate(self, X: FockOperator) -> FockOperator:
        return FockOperator(
            self.conjugate_matrix(X.matrix), X.lattice, X.parity, X.support, f"J{X.label}J",
        )

    def square_residual(self) -> float:
        M = self.unitary
        return _spectral(M @ np.conj(M) - np.eye(M.shape[0]))


@dataclass(frozen=True, eq=False)
class DoubledSystem:
    """GNS realization of the tracial state on the 4^L-dimensional doubled Fock space."""

    L: int
    lattice: LatticeSpec
    A_ops: tuple[sp.csr_matrix, ...]
    B_ops: tuple[sp.csr_matrix, ...]
    a_ops: tuple[sp.csr_matrix, ...]
    b_ops: tuple[sp.csr_matrix, ...]
    omega: ComplexArray
    parity: NDArray[np.float64]
    J: AntiunitaryOperator | None = None
    validation: Mapping[str, float] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.omega.shape[0])

    @property
    def physical(self) -> LatticeSpec:
        return LatticeSpec(self.L, Boundary.OPEN)

    @property
    def W(self) -> FockOperator:
        return FockOperator(np.diag(self.parity.astype(complex)), self.lattice, Parity.EVEN, frozenset(self.lattice.sites), "W")

    @property
    def modular(self) -> AntiunitaryOperator:
        if self.J is None:
            raise ConsistencyError("modular conjugation not built", float("inf"), 0.0)
        return self.J

    def _op(self, matrix: ComplexArray, parity: Parity, label: str) -> FockOperator:
        return FockOperator(matrix, self.lattice, parity, frozenset(self.lattice.sites), label)

    def a(self, f: SmearingVector | ArrayLike) -> FockOperator:
        return self._op(smear(f, self.a_ops), Parity.ODD, "a(f)")

    def b(self, f: SmearingVector | ArrayLike) -> FockOperator:
        return self._op(smear(f, self.b_ops), Parity.ODD, "b(f)")

    def A(self, f: SmearingVector | ArrayLike) -> FockOperator:
        return self._op(smear(f, self.A_ops), Parity.ODD, "A(f)")

    def B(self, f: SmearingVector | ArrayLike) -> FockOperator:
        return self._op(smear(f, self.B_ops), Parity.ODD, "B(f)")

    def number_A(self) -> FockOperator:
        return self._op(to_dense(sum(m.conj().T @ m for m in self.A_ops)), Parity.EVEN, "N_A")

    def number_B(self) -> FockOperator:
        return self._op(to_dense(sum(m.conj().T @ m for m in self.B_ops)), Parity.EVEN, "N_B")

    @cached_property
    def monomial_vectors(self) -> ComplexArray:
        """Columns Gamma_S(a) Omega for every bitmask S over the 2L a-Majoranas."""
        gammas = _majoranas(self.a_ops)
        n = 4**self.L
        raw = np.zeros((self.dim, n), dtype=complex)
        raw[:, 0] = self.omega
        for S in range(1, n):
            k = _lowest_bit(S)
            raw[:, S] = gammas[k] @ raw[:, S ^ (1 << k)]
        phases = np.array([_monomial_phase(S) for S in range(n)])
        return raw * phases[None, :]

    @cached_property
    def embedding(self) -> ComplexArray:
        """Unitary Y -> sqrt(2^L) Y(a) Omega from row-major vec(Y) to the doubled space."""
        L = self.L
        d = 2**L
        gammas = [to_dense(majorana(k, self.physical).matrix) for k in range(2 * L)]
        n = 4**L
        raw = np.zeros((n, d, d), dtype=complex)
        raw[0] = np.eye(d)
        for S in range(1, n):
            k = _lowest_bit(S)
            raw[S] = gammas[k] @ raw[S ^ (1 << k)]
        phases = np.array([_monomial_phase(S) for S in range(n)])
        G = (raw * phases[:, None, None]).transpose(0, 2, 1).reshape(n, d * d) / d
        return np.sqrt(d) * (self.monomial_vectors @ G)

    def represent(self, X: FockOperator | ComplexArray) -> FockOperator:
        """Image of a physical 2^L x 2^L operator in the doubled representation."""
        M = X.matrix if isinstance(X, FockOperator) else np.asarray(X, dtype=complex)
        d = 2**self.L
        if M.shape != (d, d):
            raise ShapeError(f"physical operator must be {d}x{d}, got {M.shape}")
        U = self.embedding
        image = U @ np.kron(M, np.eye(d)) @ U.conj().T
        parity = X.parity if isinstance(X, FockOperator) else Parity.MIXED
        label = X.label if isinstance(X, FockOperator) else "X"
        return self._op(image, parity, f"pi({label})")


# ============================================================================
# CONSTRUCTION
# ============================================================================

def _check(checks: dict[str, float], name: str, residual: float, tol: float) -> None:
    checks[name] = residual
    if not residual <= tol:
        raise ConsistencyError(name, residual, tol)


def cross_relation_residuals(system: DoubledSystem, f: ArrayLike, g: ArrayLike) -> dict[str, float]:
    """Anticommutators among a(f), b(g) and their adjoints, minus their c-number values."""
    af, ag, bf, bg = system.a(f).matrix, system.a(g).matrix, system.b(f).matrix, system.b(g).matrix
    eye = np.eye(system.dim)
    gf = inner(g, f)

    def anti(X: ComplexArray, Y: ComplexArray) -> ComplexArray:
        return X @ Y + Y @ X

    return {
        "{a(f),a*(g)}": _spectral(anti(af, ag.conj().T) - gf * eye),
        "{a(f),b(g)}": _spectral(anti(af, bg)),
        "{a(f),b*(g)}": _spectral(anti(af, bg.conj().T)),
        "{b(f),b*(g)}": _spectral(anti(bf, bg.conj().T) - gf * eye),
    }


def build_doubled(
    L: int,
    max_doubled_sites: int = DEFAULTS.max_doubled_sites,
    tol: float = DEFAULTS.strict_tolerance,
) -> DoubledSystem:
    """Construct and validate the doubled system, including J."""
    if L < 1:
        raise ShapeError(f"L must be >= 1, got {L}")
    if L > max_doubled_sites:
        raise ResourceLimitError(
            f"doubled system for L={L} needs a 4^{L}-dimensional space; budget is L <= {max_doubled_sites}",
            context={"L": L, "max_doubled_sites": max_doubled_sites},
        )
    n_modes = 2 * L
    A_ops = tuple(jw_sparse(x, n_modes) for x in range(L))
    B_ops = tuple(jw_sparse(L + x, n_modes) for x in range(L))
    a_ops = tuple(((A + B.conj().T) / _SQRT2).tocsr() for A, B in zip(A_ops, B_ops, strict=True))
    b_ops = tuple(((A - B.conj().T) / _SQRT2).tocsr() for A, B in zip(A_ops, B_ops, strict=True))
    omega = np.zeros(4**L, dtype=complex)
    omega[0] = 1.0
    system = DoubledSystem(
        L=L,
        lattice=LatticeSpec(n_modes, Boundary.OPEN),
        A_ops=A_ops,
        B_ops=B_ops,
        a_ops=a_ops,
        b_ops=b_ops,
        omega=omega,
        parity=parity_diagonal(n_modes),
    )

    checks: dict[str, float] = {}
    vacuum = max(float(np.linalg.norm(m @ omega)) for m in (*A_ops, *B_ops))
    _check(checks, "modes_annihilate_omega", vacuum, tol)
    _check(checks, "W_omega", float(np.linalg.norm(system.parity * omega - omega)), tol)
    cross = 0.0
    for x in range(L):
        for y in range(L):
            res = cross_relation_residuals(system, np.eye(L)[x], np.eye(L)[y])
            cross = max(cross, *res.values())
    _check(checks, "cross_relations", cross, tol)

    J = build_modular_conjugation(system)
    checks.update({f"J:{k}": v for k, v in J.checks.items()})
    logger.debug("doubled system L=%d validated: %s", L, checks)
    return replace(system, J=J, validation=checks)


def build_modular_conjugation(
    system: DoubledSystem,
    rng: np.random.Generator | None = None,
    n_samples: int = 20,
    tol: float = DEFAULTS.tolerance,
) -> AntiunitaryOperator:
    """Antilinear extension of x Omega -> x* Omega over the a-Majorana monomials.

    Asserts J^2 = 1, J Omega = Omega and J a*(f) J = W b(f); the literal
    ``J a(f-bar) J = W b(f)`` residual is recorded under ``J_conjugated_smearing_literal``.
    """
    V = system.monomial_vectors
    gram = V.conj().T @ V
    rank_defect = _spectral(gram - np.eye(V.shape[1]))
    if rank_defect > 1e-8:
        raise NumericalDegeneracyError(
            "a-monomials acting on Omega do not span the doubled space",
            context={"gram_defect": rank_defect},
        )
    J = AntiunitaryOperator(V @ V.T)

    rng = rng or np.random.default_rng(0)
    W = system.parity[:, None]
    generator = literal = 0.0
    for _ in range(n_samples):
        f = rng.normal(size=system.L) + 1j * rng.normal(size=system.L)
        a_star = system.a(f).matrix.conj().T
        b_f = system.b(f).matrix
        generator = max(generator, _spectral(J.conjugate_matrix(a_star) - W * b_f))
        literal = max(literal, _spectral(J.conjugate_matrix(system.a(np.conj(f)).matrix) - W * b_f))

    checks: dict[str, float] = {}
    _check(checks, "J_squared", J.square_residual(), tol)
    _check(checks, "J_omega", float(np.linalg.norm(J.apply(system.omega) - system.omega)), tol)
    _check(checks, "J_a_star_J_equals_W_b", generator, 1e-9)
    checks["J_conjugated_smearing_literal"] = literal
    logger.info("modular conjugation L=%d: literal a(f-bar) form deviates by %.3g", system.L, literal)
    return replace(J, checks=checks)


# ============================================================================
# STATE
# ============================================================================

@dataclass(frozen=True, eq=False)
class TracialExpectation:
    """omega(X) = <Omega|X|Omega> on the doubled space."""

    system: DoubledSystem

    def expect(self, X: ComplexArray) -> complex:
        return complex(np.vdot(self.system.omega, X @ self.system.omega))

    def density_matrix(self) -> ComplexArray:
        return np.outer(self.system.omega, self.system.omega.conj())


def tracial_expectation(P: FockOperator | ComplexArray, system: DoubledSystem) -> complex:
    M = P.matrix if isinstance(P, FockOperator) else np.asarray(P)
    if M.shape != (system.dim, system.dim):
        raise ShapeError(f"operator is {M.shape}, doubled space is {system.dim}-dimensional")
    return TracialExpectation(system).expect(M)


# ============================================================================
# DOUBLED HAMILTONIAN
# ============================================================================

@dataclass(frozen=True, eq=False)
class DoubledHamiltonian:
    operator: FockOperator
    checks: Mapping[str, float]


def _physical_samples(L: int) -> list[FockOperator]:
    phys = LatticeSpec(L, Boundary.OPEN)
    a0 = FockOperator(jw_sparse(0, L), phys, Parity.ODD, frozenset({0}), "a0")
    aL = FockOperator(jw_sparse(L - 1, L), phys, Parity.ODD, frozenset({L - 1}), f"a{L - 1}")
    hop = a0.H @ aL
    return [a0, hop + hop.H]


def doubled_hamiltonian_report(
    spec: HamiltonianSpec,
    system: DoubledSystem,
    times: Sequence[float] = (0.3, 1.1),
    tol: float = DEFAULTS.tolerance,
    dynamics_tol: float = 1e-9,
) -> DoubledHamiltonian:
    """H_d = H_a - J H_a J with every defining identity measured."""
    if spec.lattice.L != system.L:
        raise ShapeError(f"Hamiltonian has L={spec.lattice.L}, doubled system has L={system.L}")
    for term in spec.interactions:
        if len(term.creators) != len(term.annihilators):
            raise GaugeInvarianceError(term.label)
    spec.validate()

    J = system.modular
    H_a = build_hamiltonian(spec, modes=system.a_ops, space=system.lattice)
    H_d = (H_a - J.conjugate(H_a)).with_label("H_d")
    Hm = H_d.matrix
    scale = max(1.0, _spectral(Hm))

    checks: dict[str, float] = {}
    _check(checks, "H_d_omega", float(np.linalg.norm(Hm @ system.omega)), tol * scale)
    _check(checks, "J_antisymmetry", _spectral(J.conjugate_matrix(Hm) + Hm), tol * scale)
    _check(checks, "self_adjoint", _spectral(Hm - Hm.conj().T), tol * scale)

    H_phys = build_hamiltonian(spec)
    eig_phys = eigendecompose(H_phys)
    eig_d = eigendecompose(H_d)
    consistency = 0.0
    for X in _physical_samples(system.L):
        image = system.represent(X)
        evolved_d = heisenberg_series(image, eig_d, times)
        for t, Y in zip(times, evolved_d, strict=True):
            target = system.represent(heisenberg(X, eig_phys, t)).matrix
            consistency = max(consistency, _spectral(Y - target))
    _check(checks, "dynamics_consistency", consistency, dynamics_tol)

    if spec.is_quadratic:
        h = single_particle_matrix(spec.kernel, spec.lattice)
        split = second_quantize(h, system.A_ops) - second_quantize(h.T, system.B_ops)
        _check(checks, "quadratic_decoupling", _spectral(Hm - split), tol * scale)

    N_A = system.number_A().matrix
    gauge_A = _spectral(Hm @ N_A - N_A @ Hm)
    if spec.is_quadratic:
        _check(checks, "gauge_A_commutator", gauge_A, tol * scale)
    else:
        checks["gauge_A_commutator"] = gauge_A
    logger.info("doubled Hamiltonian %s: %s", spec.digest(), checks)
    return DoubledHamiltonian(H_d, checks)


def doubled_hamiltonian(spec: HamiltonianSpec, system: DoubledSystem) -> FockOperator:
    return doubled_hamiltonian_report(spec, system).operator


def commutant_of(V: FockOperator, system: DoubledSystem) -> FockOperator:
    """V' = J V J, which commutes with the represented physical algebra."""
    return system.modular.conjugate(V).with_label(f"{V.label}'")


# ============================================================================
# VERIFICATION HELPERS
# ============================================================================

def bilinear_expansion_residual(system: DoubledSystem, f: ArrayLike, g: ArrayLike) -> float:
    """2 a*(f) a(g) against A*(f)A(g) + B(f-bar)A(g) + A*(f)B*(g-bar) + B(f-bar)B*(g-bar)."""
    fv, gv = as_smearing(f), as_smearing(g)
    lhs = 2 * system.a(fv).matrix.conj().T @ system.a(gv).matrix
    A_f_star = system.A(fv).matrix.conj().T
    A_g = system.A(gv).matrix
    B_fbar = system.B(fv.conj()).matrix
    B_gbar_star = system.B(gv.conj()).matrix.conj().T
    rhs = A_f_star @ A_g + B_fbar @ A_g + A_f_star @ B_gbar_star + B_fbar @ B_gbar_star
    return _spectral(lhs - rhs)


def quartic_doubling_residual(system: DoubledSystem, x: int, y: int) -> float:
    """J n_x n_y J = (1 - n^b_x)(1 - n^b_y) for the Bogoliubov densities."""
    eye = np.eye(system.dim)
    na = [to_dense(m.conj().T @ m) for m in (system.a_ops[x], system.a_ops[y])]
    nb = [to_dense(m.conj().T @ m) for m in (system.b_ops[x], system.b_ops[y])]
    lhs = system.modular.conjugate_matrix(na[0] @ na[1])
    return _spectral(lhs - (eye - nb[0]) @ (eye - nb[1]))


def trace_property_residual(system: DoubledSystem, rng: np.random.Generator, n_pairs: int = 50) -> float:
    """max |omega(XY) - omega(YX)| over random a-polynomials."""
    state = TracialExpectation(system)
    worst = 0.0
    for _ in range(n_pairs):
        X = CarPolynomial.random(system.L, rng).matrix(system.a_ops)
        Y = CarPolynomial.random(system.L, rng).matrix(system.a_ops)
        worst = max(worst, abs(state.expect(X @ Y) - state.expect(Y @ X)))
    return worst


# ============================================================================
# U / P MACHINERY
# ============================================================================

@dataclass(frozen=True, eq=False)
class ProjectorConstruction:
    V: FockOperator
    V_prime: FockOperator
    U: FockOperator
    P: FockOperator
    checks: Mapping[str, float]
    closed_form_deviation: float
    closed_form_max_eigenvalue: float


def build_U_and_P(
    system: DoubledSystem, f0: SmearingVector | ArrayLike, tol: float = DEFAULTS.tolerance,
) -> ProjectorConstruction:
    """U = V V' W with V = a(f0) + a*(f0); P = (1 + U)/2."""
    vec = as_smearing(f0)
    if abs(vec.norm - 1.0) > tol:
        raise PreconditionError(f"f0 must be normalized, got ||f0|| = {vec.norm:.6g}")
    a = system.a(vec)
    V = (a + a.H).with_label("V")
    V_prime = commutant_of(V, system)
    U = (V @ V_prime @ system.W).with_label("U")
    eye = np.eye(system.dim)
    P = FockOperator(0.5 * (eye + U.matrix), system.lattice, Parity.EVEN, U.support, "P")

    checks: dict[str, float] = {}
    _check(checks, "U_unitary", _spectral(U.matrix.conj().T @ U.matrix - eye), tol)
    _check(checks, "U_self_adjoint", _spectral(U.matrix - U.matrix.conj().T), tol)
    _check(checks, "P_idempotent", _spectral(P.matrix @ P.matrix - P.matrix), tol)

    A0 = system.A(vec).matrix
    B0 = system.B(vec.conj()).matrix
    closed = A0 @ A0.conj().T + B0 @ B0.conj().T
    deviation = _spectral(P.matrix - closed)
    top = float(np.max(np.linalg.eigvalsh(0.5 * (closed + closed.conj().T))))
    logger.info("closed-form projector candidate: ||P - (A0A0* + B0B0*)|| = %.6g, max eigenvalue %.6g", deviation, top)
    return ProjectorConstruction(V, V_prime, U, P, checks, deviation, top)


@dataclass(frozen=True, eq=False)
class DerivativeReport:
    eigenvalues: NDArray[np.float64]
    kernel_dimension: int
    min_nonzero: float
    finite_difference_residual: float


def p_time_derivative(
    P: FockOperator,
    H_d: FockOperator,
    eig: EigenSystem,
    fd_step: float = DEFAULTS.fd_step,
    fd_tolerance: float = 1e-7,
    tol: float = DEFAULTS.tolerance,
) -> tuple[FockOperator, DerivativeReport]:
    """i[H_d, P], cross-checked against a central difference of tau_t P at t = 0."""
    if P.dim != H_d.dim:
        raise ShapeError(f"P is {P.dim}-dimensional, H_d is {H_d.dim}-dimensional")
    C = 1j * (H_d.matrix @ P.matrix - P.matrix @ H_d.matrix)
    deriv = FockOperator(C, P.lattice, Parity.EVEN, P.support, "i[H_d,P]")

    plus, minus = heisenberg_series(P, eig, (fd_step, -fd_step))
    fd = (plus - minus) / (2 * fd_step)
    fd_residual = matrix_norm(fd - C, NormKind.FROBENIUS)
    if fd_residual > fd_tolerance:
        raise ConsistencyError("finite_difference_derivative", fd_residual, fd_tolerance)

    lam = np.linalg.eigvalsh(0.5 * (C + C.conj().T))
    cutoff = tol * max(1.0, float(np.max(np.abs(lam))))
    nonzero = np.abs(lam)[np.abs(lam) > cutoff]
    report = DerivativeReport(
        eigenvalues=lam,
        kernel_dimension=int(np.sum(np.abs(lam) <= cutoff)),
        min_nonzero=float(nonzero.min()) if nonzero.size else 0.0,
        finite_difference_residual=fd_residual,
    )
    logger.info(
        "dP/dt spectrum: kernel dimension %d of %d, min nonzero |lambda| %.6g",
        report.kernel_dimension, len(lam), report.min_nonzero,
    )
    return deriv, report
