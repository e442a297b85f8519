"""Gauge twists, twisted dynamics and finite-size eigenoperator residuals.

Gamma(g) = exp(-i g sum_x x n_x), so Gamma a_x Gamma* = e^{igx} a_x. On a
ring the angle must be a multiple of 2 pi / L for x -> e^{igx} to be
single valued.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from tracial_lab.physics.car import (
    ComplexArray,
    FockOperator,
    LatticeSpec,
    NormKind,
    Parity,
    matrix_norm,
    occupations,
    translation_unitary,
    window_majorana_basis,
)
from tracial_lab.physics.dynamics import EigenSystem, eigendecompose
from tracial_lab.physics.exceptions import PreconditionError, QuantizationError, UnsupportedBoundaryError
from tracial_lab.physics.hamiltonian import HamiltonianSpec, build_hamiltonian, build_interaction

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwistAngle:
    g: float
    quantized: bool = True

    @classmethod
    def from_index(cls, k: int, L: int) -> TwistAngle:
        return cls(2 * math.pi * k / L, quantized=True)

    def validate_for(self, lattice: LatticeSpec, tol: float = 1e-9) -> None:
        if not (lattice.periodic and self.quantized):
            return
        k = self.g * lattice.L / (2 * math.pi)
        if abs(k - round(k)) > tol:
            raise QuantizationError(self.g, lattice.L)


def _angle(g: TwistAngle | float) -> TwistAngle:
    return g if isinstance(g, TwistAngle) else TwistAngle(float(g))


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """X -> left @ X @ right."""

    left: ComplexArray
    right: ComplexArray

    @classmethod
    def conjugation(cls, U: ComplexArray) -> SuperOperator:
        return cls(U, U.conj().T)

    @classmethod
    def identity(cls, dim: int) -> SuperOperator:
        eye = np.eye(dim, dtype=complex)
        return cls(eye, eye)

    def __call__(self, X: ComplexArray) -> ComplexArray:
        return self.left @ X @ self.right

    def apply(self, A: FockOperator) -> FockOperator:
        return FockOperator(self(A.matrix), A.lattice, A.parity, frozenset(A.lattice.sites), A.label)

    def compose(self, other: SuperOperator) -> SuperOperator:
        """self after other."""
        return SuperOperator(self.left @ other.left, other.right @ self.right)

    def distance(self, other: SuperOperator) -> float:
        """max over matrix units E_ij of ||self(E_ij) - other(E_ij)||_F."""
        worst = 0.0
        for i in range(self.left.shape[1]):
            diff = (
                self.left[:, i, None, None] * self.right[None, :, :]
                - other.left[:, i, None, None] * other.right[None, :, :]
            )
            worst = max(worst, float(np.sqrt(np.max(np.sum(np.abs(diff) ** 2, axis=(0, 2))))))
        return worst


def gauge_twist(g: TwistAngle | float, lattice: LatticeSpec) -> FockOperator:
    angle = _angle(g)
    angle.validate_for(lattice)
    position = occupations(lattice.L) @ np.arange(lattice.L)
    return FockOperator(
        np.diag(np.exp(-1j * angle.g * position)), lattice, Parity.EVEN, frozenset(lattice.sites), f"Gamma({angle.g:g})",
    )


def twisted_evolution(g: TwistAngle | float, eig: EigenSystem, t: float) -> SuperOperator:
    """tau_g(t) = Ad Gamma(g) o tau_t o Ad Gamma(-g)."""
    G = gauge_twist(g, eig.lattice).matrix
    forward = eig.propagator(-t)
    left = G @ forward @ G.conj().T
    return SuperOperator(left, left.conj().T)


@dataclass(frozen=True)
class CovarianceReport:
    translation_violation: float
    interaction_twist_violation: float

    @property
    def max_violation(self) -> float:
        return max(self.translation_violation, self.interaction_twist_violation)


def covariance_check(
    g: TwistAngle | float,
    spec: HamiltonianSpec,
    times: Sequence[float],
    *,
    validate: bool = True,
) -> CovarianceReport:
    """Translation commutation of the twisted dynamics and twist invariance of the interaction.

    ``validate=False`` admits interactions that break position-sum
    conservation so their violation can be measured.
    """
    lattice = spec.lattice
    if not lattice.periodic:
        raise UnsupportedBoundaryError("covariance_check")
    angle = _angle(g)
    angle.validate_for(lattice)
    eig = eigendecompose(build_hamiltonian(spec, validate=validate))
    shift = SuperOperator.conjugation(translation_unitary(lattice).matrix)
    unshift = SuperOperator(shift.right, shift.left)

    translation = 0.0
    for t in times:
        tau_g = twisted_evolution(angle, eig, float(t))
        translation = max(translation, shift.compose(tau_g).compose(unshift).distance(tau_g))

    twist = 0.0
    if spec.interactions:
        V = build_interaction(spec.interactions, lattice, validate=validate).matrix
        G = gauge_twist(angle, lattice).matrix
        twist = matrix_norm(G @ V @ G.conj().T - V, NormKind.SPECTRAL)
    report = CovarianceReport(translation, twist)
    logger.info(
        "covariance g=%.6g: translation %.3g, interaction twist %.3g", angle.g, translation, twist,
    )
    return report


def twist_locality_distance(A: FockOperator, g: TwistAngle | float) -> float:
    """||Gamma(g) A Gamma(g)* - A|| in the tracial 2-norm."""
    G = gauge_twist(g, A.lattice).matrix
    return matrix_norm(G @ A.matrix @ G.conj().T - A.matrix, NormKind.FROBENIUS)


# ============================================================================
# LOCAL EIGENOPERATORS
# ============================================================================

@dataclass(frozen=True, eq=False)
class EigenoperatorResult:
    window: tuple[int, ...]
    residual: float
    energy: float
    coefficients: ComplexArray
    labels: tuple[str, ...]
    operator: FockOperator
    full_window: bool

    @property
    def description(self) -> str:
        order = np.argsort(-np.abs(self.coefficients), kind="stable")
        parts = [
            f"({complex(self.coefficients[k]):.4g})*{self.labels[k]}"
            for k in order
            if abs(self.coefficients[k]) > 1e-6
        ]
        return " + ".join(parts[:6]) or "0"

    def overlap(self, target: FockOperator) -> float:
        """|<target, A_min>| in the normalized trace inner product, target rescaled to norm one."""
        T = target.matrix
        norm = matrix_norm(T, NormKind.FROBENIUS)
        if norm == 0.0:
            raise PreconditionError(f"{target.label} has zero norm")
        return abs(np.vdot(T, self.operator.matrix)) / (T.shape[0] * norm)


def _lowest(M: ComplexArray, Q: ComplexArray, E: float) -> tuple[float, ComplexArray]:
    n = M.shape[0]
    lam, vec = np.linalg.eigh(M - 2 * E * Q + E * E * np.eye(n))
    return float(lam[0]), vec[:, 0]


def local_eigenoperator_residual(
    window: Iterable[int],
    eig: EigenSystem,
    *,
    scan_points: int = 201,
    tie_tolerance: float = 1e-9,
    energy_tolerance: float = 1e-6,
) -> EigenoperatorResult:
    """min over normalized traceless A in the window algebra and real E of ||[H, A] - E A||_frob.

    The leakage of [H, A] out of the window counts toward the residual.
    Residuals within ``tie_tolerance`` tie; ties go to the larger |E| (values
    within ``energy_tolerance`` count as equal), then to the smaller E.
    """
    lattice = eig.lattice
    sites = tuple(sorted({lattice.check_site(x) for x in window}))
    if not sites:
        raise PreconditionError("window is empty")
    full = len(sites) == lattice.L
    if full:
        logger.warning("window covers the whole lattice; energy eigenprojections make the residual trivial")

    basis = window_majorana_basis(sites, lattice)
    H = eig.reconstruct()
    d = eig.dim
    Bs = np.stack([b.matrix for b in basis])
    Cs = np.einsum("ij,kjl->kil", H, Bs) - np.einsum("kij,jl->kil", Bs, H)
    M = np.einsum("kij,lij->kl", Cs.conj(), Cs) / d
    Q = np.einsum("kij,lij->kl", Bs.conj(), Cs) / d
    M = 0.5 * (M + M.conj().T)
    Q = 0.5 * (Q + Q.conj().T)

    radius = 2.0 * float(np.max(np.abs(eig.energies))) + 1.0
    seeds = np.concatenate((np.linalg.eigvalsh(Q), np.linspace(-radius, radius, scan_points)))
    values = np.array([_lowest(M, Q, float(E))[0] for E in seeds])

    def refine(E: float) -> tuple[float, float, ComplexArray]:
        for _ in range(4):
            _, c = _lowest(M, Q, E)
            E = float(np.real(np.vdot(c, Q @ c)))
        A = np.tensordot(c, Bs, axes=1)
        return matrix_norm(H @ A - A @ H - E * A, NormKind.FROBENIUS), E, c

    candidates: list[tuple[float, float, ComplexArray]] = []
    for idx in np.argsort(values, kind="stable")[:8]:
        E0 = float(seeds[idx])
        opt = minimize_scalar(
            lambda E: _lowest(M, Q, E)[0],
            bounds=(E0 - 0.05 * radius, E0 + 0.05 * radius),
            method="bounded",
            options={"xatol": 1e-12},
        )
        # The residual is even in E (A -> A*), so both signs are candidates.
        candidates += [refine(float(opt.x)), refine(-float(opt.x))]

    best_residual = min(r for r, _, _ in candidates)
    tied = [cand for cand in candidates if cand[0] <= best_residual + tie_tolerance]
    top = max(abs(cand[1]) for cand in tied)
    residual, E, c = min(
        (cand for cand in tied if abs(cand[1]) >= top - energy_tolerance), key=lambda cand: cand[1],
    )
    A = np.tensordot(c, Bs, axes=1)
    result = EigenoperatorResult(
        window=sites,
        residual=residual,
        energy=E,
        coefficients=c,
        labels=tuple(b.label for b in basis),
        operator=FockOperator(A, lattice, Parity.MIXED, frozenset(sites), "A_min"),
        full_window=full,
    )
    logger.info("local eigenoperator on %s: residual %.6g at E=%.6g, %s", sites, residual, E, result.description)
    return result


def eigenoperator_scan(windows: Sequence[Iterable[int]], eig: EigenSystem) -> list[EigenoperatorResult]:
    return [local_eigenoperator_residual(w, eig) for w in windows]


def residual_rows(results: Sequence[EigenoperatorResult]) -> list[tuple[str, float, float, str]]:
    """(window, residual, E, minimizer) rows for CSV output."""
    return [
        (" ".join(map(str, r.window)), r.residual, r.energy, r.description)
        for r in results
    ]
