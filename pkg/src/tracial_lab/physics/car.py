"""CAR algebra on L lattice modes in the Jordan-Wigner representation.

Basis convention: computational basis index ``b = sum_x n_x 2**(L-1-x)``, so
site 0 is the most significant tensor factor. The sign string of ``a_x``
acts on sites strictly left of x, hence ``a*_{x1} ... a*_{xk}|0>`` with
ascending x is exactly the basis vector of that occupation pattern.

Smearing convention: ``a(f) = sum_x f(x) a_x`` is linear in f and
``{a(f), a*(g)} = <g|f> = numpy.vdot(g, f)``.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache, reduce
from typing import Any

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from tracial_lab.core.errors import ResourceLimitError
from tracial_lab.core.models import DEFAULTS
from tracial_lab.physics.exceptions import PreconditionError, ShapeError, SiteIndexError, UnsupportedBoundaryError

logger = logging.getLogger(__name__)

ComplexArray = NDArray[np.complex128]
Matrix = ComplexArray | sp.spmatrix

_SIGMA = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))
_Z = sp.csr_matrix(np.diag([1.0, -1.0]).astype(complex))
_I2 = sp.identity(2, dtype=complex, format="csr")


class Boundary(StrEnum):
    PERIODIC = "periodic"
    OPEN = "open"


class Parity(StrEnum):
    EVEN = "even"
    ODD = "odd"
    MIXED = "mixed"

    def times(self, other: Parity) -> Parity:
        """Grade of a product."""
        if Parity.MIXED in (self, other):
            return Parity.MIXED
        return Parity.EVEN if self == other else Parity.ODD

    def plus(self, other: Parity) -> Parity:
        """Grade of a sum."""
        return self if self == other else Parity.MIXED


class NormKind(StrEnum):
    SPECTRAL = "spectral"
    FROBENIUS = "frobenius"


@dataclass(frozen=True)
class LatticeSpec:
    """L sites with periodic or open boundary."""

    L: int
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self) -> None:
        if not isinstance(self.L, int) or self.L < 1:
            raise PreconditionError(f"L must be >= 1, got {self.L!r}")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def dim(self) -> int:
        return 2**self.L

    @property
    def periodic(self) -> bool:
        return self.boundary == Boundary.PERIODIC

    @property
    def sites(self) -> range:
        return range(self.L)

    def check_site(self, x: int) -> int:
        if not 0 <= x < self.L:
            raise SiteIndexError(x, self.L)
        return x

    def wrap(self, x: int) -> int | None:
        """Fold x onto the lattice; None when it falls off an open chain."""
        if self.periodic:
            return x % self.L
        return x if 0 <= x < self.L else None

    def check_budget(self, max_sites: int = DEFAULTS.max_sites) -> None:
        if self.L > max_sites:
            raise ResourceLimitError(
                f"L={self.L} exceeds the dense Fock-space budget of {max_sites} sites",
                context={"L": self.L, "max_sites": max_sites},
            )


@dataclass(frozen=True, eq=False)
class SmearingVector:
    """Complex test function f on the lattice sites."""

    coefficients: ComplexArray

    def __post_init__(self) -> None:
        f = np.asarray(self.coefficients, dtype=complex)
        if f.ndim != 1:
            raise ShapeError(f"smearing vector must be 1-D, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise PreconditionError("smearing vector has non-finite entries")
        f = f.copy()
        f.setflags(write=False)
        object.__setattr__(self, "coefficients", f)

    @classmethod
    def delta(cls, x: int, L: int) -> SmearingVector:
        f = np.zeros(L, dtype=complex)
        f[x] = 1.0
        return cls(f)

    def __len__(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def conj(self) -> SmearingVector:
        return SmearingVector(self.coefficients.conj())

    def support(self) -> frozenset[int]:
        return frozenset(int(i) for i in np.flatnonzero(self.coefficients))


def as_smearing(f: SmearingVector | ArrayLike) -> SmearingVector:
    return f if isinstance(f, SmearingVector) else SmearingVector(np.asarray(f))


def inner(g: SmearingVector | ArrayLike, f: SmearingVector | ArrayLike) -> complex:
    """<g|f>, antilinear in g."""
    return complex(np.vdot(as_smearing(g).coefficients, as_smearing(f).coefficients))


def to_dense(M: Matrix) -> ComplexArray:
    if sp.issparse(M):
        return np.asarray(M.toarray(), dtype=complex)
    return np.asarray(M, dtype=complex)


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Dense operator on the 2^L Fock space with parity and support metadata."""

    matrix: ComplexArray
    lattice: LatticeSpec
    parity: Parity = Parity.MIXED
    support: frozenset[int] = field(default_factory=frozenset)
    label: str = ""

    def __post_init__(self) -> None:
        m = to_dense(self.matrix)
        n = 2**self.lattice.L
        if m.shape != (n, n):
            raise ShapeError(
                f"matrix shape {m.shape} does not match 2^{self.lattice.L} = {n}",
                context={"shape": m.shape, "L": self.lattice.L},
            )
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "parity", Parity(self.parity))
        object.__setattr__(self, "support", frozenset(self.support))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    def _check_compatible(self, other: FockOperator) -> None:
        if other.dim != self.dim:
            raise ShapeError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __matmul__(self, other: FockOperator) -> FockOperator:
        self._check_compatible(other)
        return FockOperator(
            self.matrix @ other.matrix,
            self.lattice,
            self.parity.times(other.parity),
            self.support | other.support,
            f"{self.label}{other.label}",
        )

    def __add__(self, other: FockOperator) -> FockOperator:
        self._check_compatible(other)
        return FockOperator(
            self.matrix + other.matrix,
            self.lattice,
            self.parity.plus(other.parity),
            self.support | other.support,
            f"({self.label} + {other.label})",
        )

    def __sub__(self, other: FockOperator) -> FockOperator:
        return self + (-1.0) * other

    def __mul__(self, c: complex) -> FockOperator:
        return FockOperator(c * self.matrix, self.lattice, self.parity, self.support, self.label)

    __rmul__ = __mul__

    def __neg__(self) -> FockOperator:
        return -1.0 * self

    @property
    def H(self) -> FockOperator:
        """Adjoint."""
        return FockOperator(
            self.matrix.conj().T, self.lattice, self.parity, self.support, f"({self.label})*",
        )

    def with_label(self, label: str) -> FockOperator:
        return FockOperator(self.matrix, self.lattice, self.parity, self.support, label)

    def __repr__(self) -> str:
        sites = ",".join(str(s) for s in sorted(self.support))
        return f"FockOperator({self.label or '?'}, L={self.lattice.L}, {self.parity}, {{{sites}}})"


def commutator(A: FockOperator, B: FockOperator) -> FockOperator:
    return A @ B - B @ A


def anticommutator(A: FockOperator, B: FockOperator) -> FockOperator:
    return A @ B + B @ A


def identity(lattice: LatticeSpec) -> FockOperator:
    return FockOperator(np.eye(lattice.dim, dtype=complex), lattice, Parity.EVEN, frozenset(), "1")


# ============================================================================
# JORDAN-WIGNER MODES
# ============================================================================

@lru_cache(maxsize=512)
def jw_sparse(x: int, L: int) -> sp.csr_matrix:
    """Sparse a_x; cached because every builder reuses the same few modes."""
    factors = [_Z] * x + [_SIGMA] + [_I2] * (L - x - 1)
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors).tocsr()


def annihilator_matrices(L: int) -> list[sp.csr_matrix]:
    return [jw_sparse(x, L) for x in range(L)]


def jw_annihilator(x: int, lattice: LatticeSpec) -> FockOperator:
    lattice.check_site(x)
    return FockOperator(jw_sparse(x, lattice.L), lattice, Parity.ODD, frozenset({x}), f"a{x}")


def jw_creator(x: int, lattice: LatticeSpec) -> FockOperator:
    return jw_annihilator(x, lattice).H.with_label(f"a{x}*")


@lru_cache(maxsize=32)
def occupations(L: int) -> NDArray[np.int8]:
    """(2^L, L) table of occupation numbers per basis state."""
    b = np.arange(2**L)[:, None]
    shifts = L - 1 - np.arange(L)[None, :]
    occ = ((b >> shifts) & 1).astype(np.int8)
    occ.setflags(write=False)
    return occ


def diagonal_operator(
    diag: ArrayLike, lattice: LatticeSpec, support: Iterable[int] = (), label: str = "",
) -> FockOperator:
    return FockOperator(np.diag(np.asarray(diag, dtype=complex)), lattice, Parity.EVEN, frozenset(support), label)


def number_density(x: int, lattice: LatticeSpec) -> FockOperator:
    lattice.check_site(x)
    return diagonal_operator(occupations(lattice.L)[:, x], lattice, {x}, f"n{x}")


def number_operator(lattice: LatticeSpec) -> FockOperator:
    return diagonal_operator(
        occupations(lattice.L).sum(axis=1), lattice, lattice.sites, "N",
    )


def parity_diagonal(L: int) -> NDArray[np.float64]:
    return (1.0 - 2.0 * (occupations(L).sum(axis=1) % 2)).astype(float)


def parity_operator(lattice: LatticeSpec) -> FockOperator:
    """Global parity prod_x (1 - 2 n_x)."""
    return diagonal_operator(parity_diagonal(lattice.L), lattice, lattice.sites, "W")


# ============================================================================
# SMEARED OPERATORS
# ============================================================================

def _check_length(f: SmearingVector, lattice: LatticeSpec) -> None:
    if len(f) != lattice.L:
        raise ShapeError(
            f"smearing vector has length {len(f)}, lattice has L={lattice.L}",
            context={"len": len(f), "L": lattice.L},
        )


def smear(f: SmearingVector | ArrayLike, modes: Sequence[Matrix]) -> ComplexArray:
    """sum_x f(x) M_x over an arbitrary family of mode matrices."""
    coeffs = as_smearing(f).coefficients
    if len(coeffs) != len(modes):
        raise ShapeError(f"smearing vector has length {len(coeffs)}, expected {len(modes)}")
    out: Any = None
    for c, m in zip(coeffs, modes, strict=True):
        if c == 0:
            continue
        out = c * m if out is None else out + c * m
    if out is None:
        n = modes[0].shape[0]
        return np.zeros((n, n), dtype=complex)
    return to_dense(out)


def smeared_annihilator(f: SmearingVector | ArrayLike, lattice: LatticeSpec) -> FockOperator:
    """a(f) = sum_x f(x) a_x."""
    vec = as_smearing(f)
    _check_length(vec, lattice)
    return FockOperator(
        smear(vec, annihilator_matrices(lattice.L)), lattice, Parity.ODD, vec.support(), "a(f)",
    )


def smeared_creator(g: SmearingVector | ArrayLike, lattice: LatticeSpec) -> FockOperator:
    """a*(g) = a(g)*, antilinear in g."""
    return smeared_annihilator(g, lattice).H.with_label("a*(g)")


def local_unitary_u0(
    f0: SmearingVector | ArrayLike,
    lattice: LatticeSpec,
    tol: float = DEFAULTS.tolerance,
) -> FockOperator:
    """U0 = a(f0) + a*(f0); a self-adjoint unitary when ||f0|| = 1."""
    vec = as_smearing(f0)
    if abs(vec.norm - 1.0) > tol:
        raise PreconditionError(
            f"U0 needs a normalized f0, got ||f0|| = {vec.norm:.6g}",
            context={"norm": vec.norm},
            suggestion="Divide f0 by its norm",
        )
    a = smeared_annihilator(vec, lattice)
    return (a + a.H).with_label("U0")


# ============================================================================
# NORMS AND METADATA
# ============================================================================

def matrix_norm(M: ComplexArray, kind: NormKind | str = NormKind.SPECTRAL) -> float:
    if not np.all(np.isfinite(M)):
        raise PreconditionError("operator has non-finite entries")
    if NormKind(kind) == NormKind.SPECTRAL:
        return float(np.linalg.norm(M, 2)) if M.size else 0.0
    return float(np.linalg.norm(M) / np.sqrt(M.shape[0]))


def operator_norm(A: FockOperator, kind: NormKind | str = NormKind.SPECTRAL) -> float:
    """Spectral norm, or Frobenius norm normalized so that ||1||_frob = 1."""
    return matrix_norm(A.matrix, kind)


def _right_mul(M: ComplexArray, S: sp.spmatrix) -> ComplexArray:
    return np.asarray((S.T @ M.T).T)


def parity_and_support_of(
    A: FockOperator, tol: float = DEFAULTS.tolerance,
) -> tuple[Parity, frozenset[int]]:
    """Recompute parity grade and minimal support from commutation tests.

    Site y lies outside the support iff the even part of A commutes with
    a_y, a*_y and the odd part anticommutes with them.
    """
    M = A.matrix
    L = A.lattice.L
    p = parity_diagonal(L)
    flipped = p[:, None] * M * p[None, :]
    even = 0.5 * (M + flipped)
    odd = 0.5 * (M - flipped)
    scale = max(1.0, float(np.linalg.norm(M)))

    odd_small = np.linalg.norm(odd) <= tol * scale
    even_small = np.linalg.norm(even) <= tol * scale
    if odd_small:
        parity = Parity.EVEN
    elif even_small:
        parity = Parity.ODD
    else:
        parity = Parity.MIXED
    if odd_small and even_small:
        return parity, frozenset()

    support = set()
    for y in range(L):
        a = jw_sparse(y, L)
        for s in (a, a.conj().T.tocsr()):
            r_even = float(np.linalg.norm(s @ even - _right_mul(even, s)))
            r_odd = float(np.linalg.norm(s @ odd + _right_mul(odd, s)))
            if max(r_even, r_odd) > tol * scale:
                support.add(y)
                break
    return parity, frozenset(support)


def certify(A: FockOperator, tol: float = DEFAULTS.tolerance) -> FockOperator:
    """Replace A's metadata with recomputed values."""
    parity, support = parity_and_support_of(A, tol)
    return FockOperator(A.matrix, A.lattice, parity, support, A.label)


# ============================================================================
# POLYNOMIALS IN a, a*
# ============================================================================

Word = tuple[tuple[int, bool], ...]


@dataclass(frozen=True)
class CarPolynomial:
    """sum_k c_k w_k where a word w is a product of (site, is_creator) letters.

    The same polynomial can be evaluated on any CAR family, e.g. the
    physical Jordan-Wigner modes and the Bogoliubov modes of a doubled system.
    """

    terms: tuple[tuple[complex, Word], ...]

    def matrix(self, modes: Sequence[Matrix]) -> ComplexArray:
        n = modes[0].shape[0]
        out = np.zeros((n, n), dtype=complex)
        for c, word in self.terms:
            op: Any = sp.identity(n, dtype=complex, format="csr")
            for site, dagger in word:
                m = modes[site]
                op = op @ (m.conj().T if dagger else m)
            out += c * to_dense(op)
        return out

    def adjoint(self) -> CarPolynomial:
        return CarPolynomial(tuple(
            (complex(c).conjugate(), tuple((s, not d) for s, d in reversed(w)))
            for c, w in self.terms
        ))

    @classmethod
    def random(
        cls,
        L: int,
        rng: np.random.Generator,
        n_terms: int = 4,
        max_degree: int = 3,
    ) -> CarPolynomial:
        terms = []
        for _ in range(n_terms):
            degree = int(rng.integers(0, max_degree + 1))
            word = tuple((int(rng.integers(0, L)), bool(rng.integers(0, 2))) for _ in range(degree))
            terms.append((complex(rng.normal(), rng.normal()), word))
        return cls(tuple(terms))


# ============================================================================
# MAJORANA BASIS AND TRANSLATIONS
# ============================================================================

def majorana(k: int, lattice: LatticeSpec) -> FockOperator:
    """gamma_{2x} = a_x + a*_x, gamma_{2x+1} = i(a*_x - a_x)."""
    x = lattice.check_site(k // 2)
    a = jw_annihilator(x, lattice)
    op = a + a.H if k % 2 == 0 else 1j * (a.H - a)
    return op.with_label(f"g{k}")


def majorana_monomial(indices: Sequence[int], lattice: LatticeSpec) -> FockOperator:
    """Hermitian, unitary i^{m(m-1)/2} gamma_{k1}...gamma_{km} for ascending k."""
    ks = sorted(indices)
    if len(set(ks)) != len(ks):
        raise PreconditionError(f"repeated Majorana index in {tuple(indices)}")
    if not ks:
        return identity(lattice)
    m = len(ks)
    op = reduce(lambda u, v: u @ v, (majorana(k, lattice) for k in ks))
    return ((1j) ** (m * (m - 1) // 2) * op).with_label("g" + ".".join(map(str, ks)))


def window_majorana_basis(
    window: Iterable[int], lattice: LatticeSpec, include_identity: bool = False,
) -> list[FockOperator]:
    """Orthonormal (tracial Frobenius) basis of the CAR subalgebra on a window."""
    sites = sorted({lattice.check_site(x) for x in window})
    ks = [k for x in sites for k in (2 * x, 2 * x + 1)]
    start = 0 if include_identity else 1
    return [
        majorana_monomial(combo, lattice)
        for r in range(start, len(ks) + 1)
        for combo in itertools.combinations(ks, r)
    ]


@lru_cache(maxsize=32)
def mode_permutation(perm: tuple[int, ...]) -> ComplexArray:
    """Vacuum-fixing unitary U with U a_x U* = a_{perm[x]}.

    Occupied sites are relabelled and the creators reordered ascending, which
    costs the sign of the reordering.
    """
    L = len(perm)
    if sorted(perm) != list(range(L)):
        raise PreconditionError(f"not a permutation of 0..{L - 1}: {perm}")
    target_of = np.asarray(perm)
    occ = occupations(L)
    weights = 2 ** (L - 1 - np.arange(L))
    U = np.zeros((2**L, 2**L), dtype=complex)
    for b in range(2**L):
        moved = target_of[np.flatnonzero(occ[b])]
        inversions = sum(
            1 for i in range(len(moved)) for j in range(i + 1, len(moved)) if moved[i] > moved[j]
        )
        U[int(weights[moved].sum()), b] = -1.0 if inversions % 2 else 1.0
    U.setflags(write=False)
    return U


def permute_modes(M: ComplexArray, perm: Sequence[int], *, inverse: bool = False) -> ComplexArray:
    """U M U* for the mode permutation ``perm``, or U* M U with ``inverse``."""
    U = mode_permutation(tuple(int(x) for x in perm))
    if M.shape != U.shape:
        raise ShapeError(f"matrix shape {M.shape} does not match {len(perm)} modes")
    if inverse:
        return U.conj().T @ M @ U
    return U @ M @ U.conj().T


def translation_unitary(lattice: LatticeSpec, shift: int = 1) -> FockOperator:
    """S with S a_x S* = a_{x+shift mod L}, fixing the vacuum."""
    if not lattice.periodic:
        raise UnsupportedBoundaryError("translation_unitary")
    L = lattice.L
    S = mode_permutation(tuple((x + shift) % L for x in range(L))).copy()
    return FockOperator(S, lattice, Parity.EVEN, frozenset(lattice.sites), f"S{shift}")
