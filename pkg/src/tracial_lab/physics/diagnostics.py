"""Finite-size localization and abelianess diagnostics.

Curves are sampled on an ascending time grid. Nothing here takes limits: a
curve that runs past the recurrence window of the finite system is flagged
``window_exceeded`` and kept as is.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from fractions import Fraction

import numpy as np
from numpy.typing import ArrayLike, NDArray

from tracial_lab.core.models import DEFAULTS
from tracial_lab.physics.car import (
    ComplexArray,
    FockOperator,
    LatticeSpec,
    NormKind,
    Parity,
    matrix_norm,
    parity_diagonal,
    permute_modes,
)
from tracial_lab.physics.dynamics import EigenSystem, State, as_state, heisenberg_series, single_particle_propagator
from tracial_lab.physics.exceptions import ParityError, PreconditionError, ShapeError

logger = logging.getLogger(__name__)


class Quantity(StrEnum):
    COMMUTATOR_NORM = "commutator_norm"
    ANTICOMMUTATOR_NORM = "anticommutator_norm"
    LOCALIZATION_RADIUS = "localization_radius"
    CLUSTERING_DEFECT = "clustering_defect"
    PROJECTOR_DEFECT = "projector_defect"


@dataclass(frozen=True, eq=False)
class DecayCurve:
    times: NDArray[np.float64]
    values: NDArray[np.float64]
    quantity: Quantity
    metadata: Mapping[str, str] = field(default_factory=dict)
    t_max: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape:
            raise ShapeError(f"curve has {times.shape[0]} times but {values.shape[0]} values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        flags = tuple(self.flags)
        if self.t_max is not None and times.size and times[-1] > self.t_max and "window_exceeded" not in flags:
            flags += ("window_exceeded",)
        object.__setattr__(self, "flags", flags)

    @property
    def window_exceeded(self) -> bool:
        return "window_exceeded" in self.flags

    def within(self, t_max: float) -> NDArray[np.float64]:
        return self.values[self.times <= t_max]


@dataclass(frozen=True, eq=False)
class ClusterReport:
    times: NDArray[np.float64]
    defect: NDArray[np.float64]
    product: NDArray[np.float64]
    bound: float


def _check_grid(times: ArrayLike) -> NDArray[np.float64]:
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        raise PreconditionError("time grid is empty")
    if np.any(np.diff(t) <= 0):
        raise PreconditionError("time grid must be strictly ascending", context={"times": t.tolist()})
    return t


def _same_space(*ops: FockOperator) -> None:
    dims = {op.dim for op in ops}
    if len(dims) != 1:
        raise ShapeError(f"operators live on different spaces: dimensions {sorted(dims)}")


def _curve_metadata(A: FockOperator, B: FockOperator | None, kind: NormKind, extra: Mapping[str, str] | None) -> dict[str, str]:
    meta = {"A": A.label or "A", "norm": str(kind), "L": str(A.lattice.L), "boundary": str(A.lattice.boundary)}
    if B is not None:
        meta["B"] = B.label or "B"
    meta.update(extra or {})
    return meta


def commutator_decay(
    A: FockOperator,
    B: FockOperator,
    eig: EigenSystem,
    times: ArrayLike,
    norm: NormKind | str = NormKind.SPECTRAL,
    *,
    t_max: float | None = None,
    metadata: Mapping[str, str] | None = None,
) -> DecayCurve:
    """||[tau_t A, B]|| on the grid."""
    t = _check_grid(times)
    _same_space(A, B)
    if A.parity == Parity.ODD and B.parity == Parity.ODD:
        raise ParityError("both operators are odd; use anticommutator_decay")
    kind = NormKind(norm)
    Bm = B.matrix
    values = [matrix_norm(At @ Bm - Bm @ At, kind) for At in heisenberg_series(A, eig, t)]
    return DecayCurve(t, np.asarray(values), Quantity.COMMUTATOR_NORM, _curve_metadata(A, B, kind, metadata), t_max)


def anticommutator_decay(
    A: FockOperator,
    B: FockOperator,
    eig: EigenSystem,
    times: ArrayLike,
    norm: NormKind | str = NormKind.SPECTRAL,
    *,
    t_max: float | None = None,
    metadata: Mapping[str, str] | None = None,
) -> DecayCurve:
    """||{tau_t A, B}|| for odd A and B."""
    t = _check_grid(times)
    _same_space(A, B)
    for op in (A, B):
        if op.parity != Parity.ODD:
            raise ParityError(f"anticommutator_decay needs odd operators, {op.label or 'operator'} is {op.parity}")
    kind = NormKind(norm)
    Bm = B.matrix
    values = [matrix_norm(At @ Bm + Bm @ At, kind) for At in heisenberg_series(A, eig, t)]
    return DecayCurve(t, np.asarray(values), Quantity.ANTICOMMUTATOR_NORM, _curve_metadata(A, B, kind, metadata), t_max)


# ============================================================================
# CONDITIONAL EXPECTATION AND LOCALIZATION
# ============================================================================

def localization_window(lattice: LatticeSpec, center: int, radius: int) -> tuple[int, ...]:
    """Sites within ``radius`` of ``center``: clipped on a chain, wrapped on a ring."""
    lattice.check_site(center)
    if lattice.periodic:
        return tuple(sorted({(center + k) % lattice.L for k in range(-radius, radius + 1)}))
    return tuple(range(max(0, center - radius), min(lattice.L - 1, center + radius) + 1))


def _window_sites(window: Iterable[int], lattice: LatticeSpec) -> tuple[int, ...]:
    return tuple(sorted({lattice.check_site(x) for x in window}))


def conditional_expectation_matrix(M: ComplexArray, L: int, first: int, last: int) -> ComplexArray:
    """Trace-compatible projection of M onto the CAR subalgebra of sites first..last.

    In Jordan-Wigner form the window algebra is spanned by even Pauli strings
    on the window and by odd ones dressed with Z on every site to the left,
    so the projection keeps the all-identity and all-Z components of the left
    block and the identity component of the right block.
    """
    if last < first:
        return np.eye(M.shape[0], dtype=complex) * (np.trace(M) / M.shape[0])
    dl, dw, dr = 2**first, 2 ** (last - first + 1), 2 ** (L - 1 - last)
    T = M.reshape(dl, dw, dr, dl, dw, dr)
    zl = parity_diagonal(first)
    scale = dl * dr
    X_id = np.einsum("aibajb->ij", T) / scale
    X_z = np.einsum("a,aibajb->ij", zl, T) / scale
    pw = parity_diagonal(last - first + 1)
    even = 0.5 * (X_id + pw[:, None] * X_id * pw[None, :])
    odd = 0.5 * (X_z - pw[:, None] * X_z * pw[None, :])
    eye_r = np.eye(dr)
    return np.kron(np.kron(np.eye(dl), even), eye_r) + np.kron(np.kron(np.diag(zl), odd), eye_r)


def window_expectation_matrix(M: ComplexArray, L: int, sites: Sequence[int]) -> ComplexArray:
    """Projection onto the CAR subalgebra of any site set.

    A set that is not an interval is first moved to the left end by a mode
    permutation; the permutation is a trace-preserving automorphism, so the
    contiguous projection conjugated back is the projection onto the set.
    """
    ordered = sorted(set(sites))
    if not ordered or ordered[-1] - ordered[0] + 1 == len(ordered):
        return conditional_expectation_matrix(M, L, ordered[0] if ordered else 0, ordered[-1] if ordered else -1)
    inside = set(ordered)
    order = ordered + [x for x in range(L) if x not in inside]
    perm = [0] * L
    for new, old in enumerate(order):
        perm[old] = new
    moved = conditional_expectation_matrix(permute_modes(M, perm), L, 0, len(ordered) - 1)
    return permute_modes(moved, perm, inverse=True)


def conditional_expectation(A: FockOperator, window: Iterable[int]) -> FockOperator:
    sites = _window_sites(window, A.lattice)
    return FockOperator(
        window_expectation_matrix(A.matrix, A.lattice.L, sites),
        A.lattice, A.parity, frozenset(sites), f"E[{','.join(map(str, sites))}]({A.label})",
    )


def _center(A: FockOperator) -> int:
    if not A.support:
        return 0
    lo, hi = min(A.support), max(A.support)
    return lo + (hi - lo) // 2


def _radius_of(M: ComplexArray, lattice: LatticeSpec, center: int, threshold: float) -> int:
    reach = lattice.L // 2 if lattice.periodic else max(center, lattice.L - 1 - center)
    for r in range(reach + 1):
        win = localization_window(lattice, center, r)
        residual = matrix_norm(M - window_expectation_matrix(M, lattice.L, win), NormKind.FROBENIUS)
        if residual <= threshold:
            return r
    return reach


def localization_radius(
    A: FockOperator,
    eig: EigenSystem,
    times: ArrayLike,
    epsilon: float,
    *,
    center: int | None = None,
    t_max: float | None = None,
    metadata: Mapping[str, str] | None = None,
) -> DecayCurve:
    """Smallest half-width r whose centered window carries tau_t A up to epsilon ||A||_frob."""
    if not 0.0 < epsilon < 1.0:
        raise PreconditionError(f"epsilon must lie in (0, 1), got {epsilon}")
    t = _check_grid(times)
    c = _center(A) if center is None else A.lattice.check_site(center)
    threshold = epsilon * matrix_norm(A.matrix, NormKind.FROBENIUS)
    radii = [_radius_of(At, A.lattice, c, threshold) for At in heisenberg_series(A, eig, t)]
    meta = _curve_metadata(A, None, NormKind.FROBENIUS, metadata)
    meta.update({"epsilon": repr(epsilon), "center": str(c)})
    return DecayCurve(t, np.asarray(radii, dtype=float), Quantity.LOCALIZATION_RADIUS, meta, t_max)


# ============================================================================
# CLUSTERING
# ============================================================================

def multitime_cluster(
    A: FockOperator,
    B: FockOperator,
    C: FockOperator,
    D: FockOperator,
    eig: EigenSystem,
    state: State | ArrayLike,
    times: ArrayLike,
) -> ClusterReport:
    """|w(A B_t C D_t) - w(AC) w(BD)| and |w(A B_t A* B_t*)| against w(AA*) w(BB*)."""
    t = _check_grid(times)
    _same_space(A, B, C, D)
    st = as_state(state)
    if st.density_matrix().shape[0] != A.dim:
        raise ShapeError(f"state dimension does not match operators of dimension {A.dim}")
    Am, Cm = A.matrix, C.matrix
    Ad = Am.conj().T
    base = st.expect(Am @ Cm) * st.expect(B.matrix @ D.matrix)
    bound = float(st.expect(Am @ Ad).real * st.expect(B.matrix @ B.matrix.conj().T).real)
    Bt = heisenberg_series(B, eig, t)
    Dt = heisenberg_series(D, eig, t)
    defect = np.array([abs(st.expect(Am @ b @ Cm @ d) - base) for b, d in zip(Bt, Dt, strict=True)])
    product = np.array([abs(st.expect(Am @ b @ Ad @ b.conj().T)) for b in Bt])
    return ClusterReport(t, defect, product, bound)


def projector_convergence(
    P: FockOperator, eig: EigenSystem, psi: ArrayLike, times: ArrayLike,
) -> DecayCurve:
    """||(tau_t P - 1) psi|| for a fixed vector."""
    t = _check_grid(times)
    vec = np.asarray(psi, dtype=complex).ravel()
    if vec.shape[0] != P.dim:
        raise ShapeError(f"vector has length {vec.shape[0]}, operator dimension is {P.dim}")
    values = [float(np.linalg.norm(Pt @ vec - vec)) for Pt in heisenberg_series(P, eig, t)]
    return DecayCurve(t, np.asarray(values), Quantity.PROJECTOR_DEFECT, {"A": P.label or "P", "norm": "vector"})


def quasifree_commutator_oracle(
    K1: ArrayLike,
    K2: ArrayLike,
    h: ArrayLike,
    times: ArrayLike,
    norm: NormKind | str = NormKind.SPECTRAL,
) -> NDArray[np.float64]:
    """Analytic ||[tau_t dGamma(K1), dGamma(K2)]|| for Hermitian one-body K1, K2.

    tau_t dGamma(K) = dGamma(e^{iht} K e^{-iht}) and the commutator is
    dGamma(C) with C anti-Hermitian. Its spectral norm is the larger of the
    positive and negative eigenvalue sums of C/i; the normalized Frobenius
    norm squared is (|tr C|^2 + ||C||_F^2) / 4.
    """
    k1 = np.asarray(K1, dtype=complex)
    k2 = np.asarray(K2, dtype=complex)
    for k in (k1, k2):
        if np.linalg.norm(k - k.conj().T) > DEFAULTS.tolerance * max(1.0, float(np.linalg.norm(k))):
            raise PreconditionError("oracle needs Hermitian one-body operators")
    kind = NormKind(norm)
    out = []
    for t in _check_grid(times):
        U = single_particle_propagator(h, float(t))
        k1t = U @ k1 @ U.conj().T
        C = k1t @ k2 - k2 @ k1t
        if kind == NormKind.SPECTRAL:
            lam = np.linalg.eigvalsh(-1j * C)
            out.append(max(float(lam[lam > 0].sum()), float(-lam[lam < 0].sum())))
        else:
            out.append(math.sqrt((abs(np.trace(C)) ** 2 + float(np.linalg.norm(C)) ** 2) / 4.0))
    return np.asarray(out)


# ============================================================================
# RECURRENCE
# ============================================================================

@dataclass(frozen=True)
class RecurrenceWindow:
    t_max: float
    period: float | None
    min_gap: float | None
    ballistic: float | None


def bohr_frequencies(eig: EigenSystem, merge_tolerance: float | None = None) -> NDArray[np.float64]:
    """Distinct positive Bohr frequencies, merged within the gap tolerance."""
    tol = eig.gap_tolerance if merge_tolerance is None else merge_tolerance
    levels = np.array([eig.energies[start:stop].mean() for start, stop in eig.groups])
    diffs = np.sort((levels[:, None] - levels[None, :]).ravel())
    diffs = diffs[diffs > tol]
    if diffs.size == 0:
        return diffs
    keep = np.concatenate(([True], np.diff(diffs) > tol))
    return diffs[keep]


def _common_period(freqs: NDArray[np.float64], max_denominator: int, tol: float) -> float | None:
    base = float(freqs[0])
    denominators = []
    for f in freqs:
        ratio = float(f) / base
        frac = Fraction(ratio).limit_denominator(max_denominator)
        if abs(ratio - float(frac)) > tol * max(1.0, ratio):
            return None
        denominators.append(frac.denominator)
    return 2 * math.pi * math.lcm(*denominators) / base


def recurrence_window(
    eig: EigenSystem,
    L: int | None = None,
    velocity: float | None = None,
    *,
    max_denominator: int = 12,
    rational_tol: float = 1e-8,
) -> RecurrenceWindow:
    """Heuristic time up to which a finite-size curve is trusted.

    A commensurate Bohr spectrum recurs exactly after its common period.
    Otherwise the window is the dephasing time 2 pi / (smallest frequency
    spacing), and never shorter than the ballistic transit L / (2 v) when a
    group velocity is supplied.
    """
    freqs = bohr_frequencies(eig)
    ballistic = L / (2.0 * velocity) if L and velocity else None
    if freqs.size == 0:
        logger.info("recurrence window: static spectrum, no recurrence")
        return RecurrenceWindow(math.inf, None, None, ballistic)
    period = _common_period(freqs, max_denominator, rational_tol)
    spacing = np.diff(np.concatenate(([0.0], freqs)))
    min_gap = float(spacing.min())
    if period is not None:
        logger.info("recurrence window: commensurate spectrum, exact period %.6g", period)
        return RecurrenceWindow(period, period, min_gap, ballistic)
    t_max = 2 * math.pi / min_gap
    if ballistic is not None:
        t_max = max(t_max, ballistic)
    logger.info("recurrence window: T_max = %.6g (min Bohr spacing %.3g, ballistic %s)", t_max, min_gap, ballistic)
    return RecurrenceWindow(t_max, None, min_gap, ballistic)


def contrast_minima(
    interacting: DecayCurve, quasifree: DecayCurve, t_min: float, t_max: float,
) -> tuple[float, float]:
    """Minima of two curves over [t_min, t_max] on a shared grid."""
    if not np.array_equal(interacting.times, quasifree.times):
        raise ShapeError("contrast curves must share one time grid")
    mask = (interacting.times >= t_min) & (interacting.times <= t_max)
    if not mask.any():
        raise PreconditionError(f"no grid points inside [{t_min}, {t_max}]")
    return float(interacting.values[mask].min()), float(quasifree.values[mask].min())
