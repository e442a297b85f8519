"""Exact Heisenberg dynamics, the quasifree fast path, invariant means and Bohr spectra.

Convention: tau_t A = e^{iHt} A e^{-iHt}, so d/dt tau_t A = i[H, tau_t A].
Everything is computed in the eigenbasis of H, where tau_t multiplies the
(m, n) entry by e^{i(E_m - E_n)t}.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np
import scipy.linalg as la
from numpy.typing import ArrayLike, NDArray
from scipy.special import jv

from tracial_lab.core.models import DEFAULTS
from tracial_lab.physics.car import (
    ComplexArray,
    FockOperator,
    LatticeSpec,
    SmearingVector,
    as_smearing,
    smeared_annihilator,
)
from tracial_lab.physics.exceptions import PreconditionError, ShapeError

logger = logging.getLogger(__name__)


def _is_hermitian(M: ComplexArray, tol: float) -> bool:
    return bool(np.linalg.norm(M - M.conj().T) <= tol * max(1.0, float(np.linalg.norm(M))))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Spectral decomposition H = V diag(E) V* with degeneracy groups.

    ``groups`` holds (start, stop) index ranges of ascending eigenvalues
    that lie within ``gap_tolerance`` of their neighbours.
    """

    energies: NDArray[np.float64]
    vectors: ComplexArray
    groups: tuple[tuple[int, int], ...]
    lattice: LatticeSpec
    gap_tolerance: float = DEFAULTS.gap_tolerance

    @property
    def dim(self) -> int:
        return int(self.energies.shape[0])

    def group_index(self) -> NDArray[np.int64]:
        idx = np.empty(self.dim, dtype=np.int64)
        for g, (start, stop) in enumerate(self.groups):
            idx[start:stop] = g
        return idx

    def to_eigenbasis(self, M: ComplexArray) -> ComplexArray:
        return self.vectors.conj().T @ M @ self.vectors

    def from_eigenbasis(self, M: ComplexArray) -> ComplexArray:
        return self.vectors @ M @ self.vectors.conj().T

    def bohr_matrix(self) -> NDArray[np.float64]:
        """omega[m, n] = E_m - E_n."""
        return self.energies[:, None] - self.energies[None, :]

    def evolve_eigen(self, A_eig: ComplexArray, t: float) -> ComplexArray:
        """tau_t in the eigenbasis, returned in the computational basis."""
        phase = np.exp(1j * t * self.energies)
        return self.from_eigenbasis(phase[:, None] * A_eig * phase.conj()[None, :])

    def propagator(self, t: float) -> ComplexArray:
        """e^{-iHt}."""
        return (self.vectors * np.exp(-1j * t * self.energies)[None, :]) @ self.vectors.conj().T

    def reconstruct(self) -> ComplexArray:
        """V diag(E) V*."""
        return (self.vectors * self.energies[None, :]) @ self.vectors.conj().T


def cluster_energies(energies: NDArray[np.float64], gap_tolerance: float) -> tuple[tuple[int, int], ...]:
    groups: list[tuple[int, int]] = []
    start = 0
    for i in range(1, len(energies) + 1):
        if i == len(energies) or energies[i] - energies[i - 1] > gap_tolerance:
            groups.append((start, i))
            start = i
    return tuple(groups)


def eigendecompose(
    H: FockOperator,
    gap_tolerance: float = DEFAULTS.gap_tolerance,
    tol: float = DEFAULTS.tolerance,
) -> EigenSystem:
    if not _is_hermitian(H.matrix, tol):
        raise PreconditionError(f"eigendecompose needs a self-adjoint operator, got {H.label or 'H'}")
    energies, vectors = la.eigh(H.matrix)
    groups = cluster_energies(energies, gap_tolerance)
    logger.debug("eigendecompose: dim=%d, %d degeneracy groups", len(energies), len(groups))
    return EigenSystem(energies, vectors, groups, H.lattice, gap_tolerance)


def _check_dim(A: FockOperator, eig: EigenSystem) -> None:
    if A.dim != eig.dim:
        raise ShapeError(f"operator dimension {A.dim} does not match eigensystem {eig.dim}")


def heisenberg(A: FockOperator, eig: EigenSystem, t: float) -> FockOperator:
    """tau_t A = e^{iHt} A e^{-iHt}."""
    _check_dim(A, eig)
    if t == 0:
        return A
    return FockOperator(
        eig.evolve_eigen(eig.to_eigenbasis(A.matrix), t),
        A.lattice,
        A.parity,
        frozenset(A.lattice.sites),
        f"tau_{t:g}({A.label})",
    )


def heisenberg_series(A: FockOperator, eig: EigenSystem, times: Sequence[float]) -> list[ComplexArray]:
    """tau_t A matrices for a whole time grid, reusing one basis change."""
    _check_dim(A, eig)
    A_eig = eig.to_eigenbasis(A.matrix)
    return [eig.evolve_eigen(A_eig, float(t)) for t in times]


# ============================================================================
# QUASIFREE FAST PATH
# ============================================================================

def single_particle_propagator(h: ArrayLike, t: float) -> ComplexArray:
    """e^{iht} for a Hermitian single-particle matrix."""
    hm = np.asarray(h, dtype=complex)
    if hm.ndim != 2 or hm.shape[0] != hm.shape[1]:
        raise ShapeError(f"single-particle matrix must be square, got {hm.shape}")
    if not _is_hermitian(hm, DEFAULTS.tolerance):
        raise PreconditionError("single-particle matrix h is not Hermitian")
    return np.asarray(la.expm(1j * t * hm))


def quasifree_smearing(f: SmearingVector | ArrayLike, h: ArrayLike, t: float) -> SmearingVector:
    """Smearing function of tau_t a(f) under dGamma(h).

    The dynamics acts as a(f) -> a(e^{iht} f) when smearing is antilinear;
    with the linear smearing used here the evolved function is
    e^{-i h^T t} f = conj(e^{iht}) f.
    """
    vec = as_smearing(f)
    U = single_particle_propagator(h, t)
    if U.shape[0] != len(vec):
        raise ShapeError(f"h is {U.shape[0]}x{U.shape[0]} but f has length {len(vec)}")
    return SmearingVector(U.conj() @ vec.coefficients)


def quasifree_heisenberg(
    f: SmearingVector | ArrayLike, h: ArrayLike, t: float, lattice: LatticeSpec,
) -> FockOperator:
    return smeared_annihilator(quasifree_smearing(f, h, t), lattice).with_label(f"a_t{t:g}(f)")


def bessel_amplitudes(xs: ArrayLike, t: float, hopping: float = 1.0) -> NDArray[np.float64]:
    """|J_x(2 t hopping)|: infinite-chain nearest-neighbor propagator amplitude."""
    return np.abs(jv(np.asarray(xs), 2.0 * hopping * t))


# ============================================================================
# INVARIANT MEANS
# ============================================================================

def eta_mean(A: FockOperator, eig: EigenSystem) -> FockOperator:
    """Pinching sum_E P_E A P_E over degeneracy groups."""
    _check_dim(A, eig)
    g = eig.group_index()
    mask = g[:, None] == g[None, :]
    return FockOperator(
        eig.from_eigenbasis(np.where(mask, eig.to_eigenbasis(A.matrix), 0)),
        A.lattice, A.parity, frozenset(A.lattice.sites), f"eta({A.label})",
    )


def cesaro_mean(A: FockOperator, eig: EigenSystem, T: float) -> FockOperator:
    """(1/T) int_0^T tau_t A dt, exact in the eigenbasis."""
    _check_dim(A, eig)
    if T <= 0:
        raise PreconditionError(f"Cesaro window must be positive, got T={T}")
    x = eig.bohr_matrix() * T
    small = np.abs(x) < 1e-12
    safe = np.where(small, 1.0, x)
    factor = np.where(small, 1.0 + 0j, (np.exp(1j * safe) - 1.0) / (1j * safe))
    return FockOperator(
        eig.from_eigenbasis(factor * eig.to_eigenbasis(A.matrix)),
        A.lattice, A.parity, frozenset(A.lattice.sites), f"mean_{T:g}({A.label})",
    )


def suggest_t_max(L: int, hopping: float = 1.0) -> float:
    """L/4 in units where the hopping is 1: inside the pre-recurrence window."""
    return L / (4.0 * abs(hopping)) if hopping else float("inf")


# ============================================================================
# STATES AND BOHR SPECTRA
# ============================================================================

@runtime_checkable
class State(Protocol):
    def expect(self, X: ComplexArray) -> complex: ...

    def density_matrix(self) -> ComplexArray: ...


@dataclass(frozen=True, eq=False)
class VectorState:
    psi: ComplexArray
    tol: float = DEFAULTS.tolerance

    def __post_init__(self) -> None:
        psi = np.asarray(self.psi, dtype=complex).ravel()
        norm = float(np.linalg.norm(psi))
        if abs(norm - 1.0) > self.tol:
            raise PreconditionError(f"state vector not normalized: ||psi|| = {norm:.6g}")
        object.__setattr__(self, "psi", psi)

    def expect(self, X: ComplexArray) -> complex:
        return complex(np.vdot(self.psi, X @ self.psi))

    def density_matrix(self) -> ComplexArray:
        return np.outer(self.psi, self.psi.conj())


@dataclass(frozen=True)
class TracialState:
    """omega(X) = tr(X) / dim."""

    dim: int

    def expect(self, X: ComplexArray) -> complex:
        return complex(np.trace(X) / self.dim)

    def density_matrix(self) -> ComplexArray:
        return np.eye(self.dim, dtype=complex) / self.dim


def as_state(state: State | ArrayLike) -> State:
    if isinstance(state, State):
        return state
    return VectorState(np.asarray(state))


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Atoms (omega_k, w_k): f(t) = sum_k w_k e^{i omega_k t}."""

    frequencies: NDArray[np.float64]
    weights: ComplexArray

    def evaluate(self, times: ArrayLike) -> ComplexArray:
        t = np.asarray(times, dtype=float)
        return np.exp(1j * np.outer(t, self.frequencies)) @ self.weights

    @property
    def total_weight(self) -> complex:
        return complex(self.weights.sum())

    @property
    def atoms(self) -> list[tuple[float, complex]]:
        return [(float(w), complex(c)) for w, c in zip(self.frequencies, self.weights, strict=True)]

    def is_nonnegative(self, tol: float = DEFAULTS.tolerance) -> bool:
        return bool(np.all(self.weights.real >= -tol) and np.all(np.abs(self.weights.imag) <= tol))


def correlation_spectrum(
    A: FockOperator,
    B: FockOperator,
    eig: EigenSystem,
    state: State | ArrayLike,
    merge_tolerance: float | None = None,
    drop_below: float = 1e-14,
) -> SpectralMeasure:
    """Bohr decomposition of t -> omega(A* tau_t B).

    Weights are complex in general; for A = B and an H-invariant state
    they are nonnegative.
    """
    _check_dim(A, eig)
    _check_dim(B, eig)
    st = as_state(state)
    rho = eig.to_eigenbasis(st.density_matrix())
    A_eig = eig.to_eigenbasis(A.matrix)
    B_eig = eig.to_eigenbasis(B.matrix)
    # f(t) = sum_{m,n} (rho A*)_{nm} B_{mn} e^{i(E_m - E_n)t}
    w = (rho @ A_eig.conj().T).T * B_eig
    omega = eig.bohr_matrix()

    tol = eig.gap_tolerance if merge_tolerance is None else merge_tolerance
    order = np.argsort(omega, axis=None, kind="stable")
    om = omega.ravel()[order]
    ww = w.ravel()[order]
    freqs: list[float] = []
    weights: list[complex] = []
    start = 0
    for i in range(1, len(om) + 1):
        if i == len(om) or om[i] - om[i - 1] > tol:
            total = complex(ww[start:i].sum())
            if abs(total) > drop_below:
                freqs.append(float(om[start:i].mean()))
                weights.append(total)
            start = i
    return SpectralMeasure(np.asarray(freqs, dtype=float), np.asarray(weights, dtype=complex))
