"""Lattice Hamiltonians: quasifree hopping, position-sum-conserving interactions, GGE strings.

Interaction terms are ``c * a*_{x1}...a*_{xk} a_{y1}...a_{yk}`` and must satisfy
``sum x == sum y`` (mod L on rings). Builders add the adjoint of a term only
when the term is not already self-adjoint, so a density-density term with a
real coefficient contributes exactly ``c * n_x n_y``.

Every builder accepts an optional family of annihilator matrices; the doubled
system reuses them with its Bogoliubov modes.
"""

from __future__ import annotations

import hashlib
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from tracial_lab.core.models import DEFAULTS
from tracial_lab.physics.car import (
    ComplexArray,
    FockOperator,
    LatticeSpec,
    Matrix,
    Parity,
    annihilator_matrices,
    occupations,
    to_dense,
)
from tracial_lab.physics.exceptions import (
    GaugeInvarianceError,
    KernelConjugacyError,
    PositionSumError,
    PreconditionError,
    SiteIndexError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HoppingKernel:
    """f(d) keyed by displacement d; self-adjoint iff f(-d) = conj(f(d))."""

    entries: Mapping[int, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "entries", {int(d): complex(v) for d, v in sorted(self.entries.items())},
        )

    def __hash__(self) -> int:
        return hash(tuple(self.entries.items()))

    @classmethod
    def from_pairs(cls, half: Mapping[int, complex]) -> HoppingKernel:
        """Complete {d: f(d)} with the conjugate entries at -d."""
        full: dict[int, complex] = {}
        for d, v in half.items():
            full[int(d)] = complex(v)
            full[-int(d)] = complex(v).conjugate() if d else complex(v).real
        return cls(full)

    @classmethod
    def nearest_neighbor(cls, t: float = 1.0, mu: float = 0.0) -> HoppingKernel:
        entries: dict[int, complex] = {1: t, -1: t}
        if mu:
            entries[0] = mu
        return cls(entries)

    @classmethod
    def onsite(cls, mu: float) -> HoppingKernel:
        return cls({0: mu})

    def validate(self, tol: float = DEFAULTS.strict_tolerance) -> None:
        for d, v in self.entries.items():
            partner = self.entries.get(-d, 0j)
            if abs(partner - v.conjugate()) > tol:
                raise KernelConjugacyError(d, v, partner)

    def __getitem__(self, d: int) -> complex:
        return self.entries.get(d, 0j)


def _site_list(sites: Iterable[int]) -> tuple[int, ...]:
    return tuple(int(s) for s in sites)


@dataclass(frozen=True)
class InteractionTerm:
    """coefficient * a*_{creators} a_{annihilators}, in the listed order."""

    creators: tuple[int, ...]
    annihilators: tuple[int, ...]
    coefficient: complex = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "creators", _site_list(self.creators))
        object.__setattr__(self, "annihilators", _site_list(self.annihilators))
        object.__setattr__(self, "coefficient", complex(self.coefficient))

    @property
    def label(self) -> str:
        c = ",".join(map(str, self.creators))
        a = ",".join(map(str, self.annihilators))
        return f"{c} | {a} | {self.coefficient!r}"

    def validate_for(self, lattice: LatticeSpec) -> None:
        if len(self.creators) != len(self.annihilators):
            raise GaugeInvarianceError(self.label)
        for s in (*self.creators, *self.annihilators):
            lattice.check_site(s)
        created, annihilated = sum(self.creators), sum(self.annihilators)
        if lattice.periodic:
            if (created - annihilated) % lattice.L:
                raise PositionSumError(self.label, created, annihilated, lattice.L)
        elif created != annihilated:
            raise PositionSumError(self.label, created, annihilated, None)

    def translated(self, shift: int, lattice: LatticeSpec) -> InteractionTerm | None:
        moved = [lattice.wrap(s + shift) for s in (*self.creators, *self.annihilators)]
        if any(m is None for m in moved):
            return None
        k = len(self.creators)
        sites = [int(m) for m in moved if m is not None]
        return InteractionTerm(tuple(sites[:k]), tuple(sites[k:]), self.coefficient)

    def matrix(self, modes: Sequence[Matrix]) -> ComplexArray:
        op: Any = None
        for x in self.creators:
            m = modes[x].conj().T
            op = m if op is None else op @ m
        for y in self.annihilators:
            op = modes[y] if op is None else op @ modes[y]
        if op is None:
            n = modes[0].shape[0]
            return self.coefficient * np.eye(n, dtype=complex)
        return self.coefficient * to_dense(op)


@dataclass(frozen=True)
class GGETerm:
    """f(Lambda) * prod_{j in Lambda} sigma_z^{j+x}, summed over translates x."""

    sites: tuple[int, ...]
    coefficient: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "sites", _site_list(self.sites))
        if not self.sites:
            raise PreconditionError("GGE term needs a nonempty site subset")
        c = complex(self.coefficient)
        if abs(c.imag) > 0:
            raise PreconditionError(f"GGE coefficient must be real, got {self.coefficient!r}")
        object.__setattr__(self, "coefficient", float(c.real))


@dataclass(frozen=True)
class HamiltonianSpec:
    lattice: LatticeSpec
    kernel: HoppingKernel = field(default_factory=HoppingKernel)
    interactions: tuple[InteractionTerm, ...] = ()
    gge_terms: tuple[GGETerm, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "interactions", tuple(self.interactions))
        object.__setattr__(self, "gge_terms", tuple(self.gge_terms))

    def validate(self) -> None:
        self.kernel.validate()
        for term in self.interactions:
            term.validate_for(self.lattice)

    @property
    def is_quadratic(self) -> bool:
        return not self.interactions and not self.gge_terms

    def quasifree_part(self) -> HamiltonianSpec:
        return HamiltonianSpec(self.lattice, self.kernel)

    def to_text(self) -> str:
        """Sectioned key = value rendering; round-trips through the scenario parser."""
        lines = ["[kernel]"]
        lines += [f"{d} = {v!r}" for d, v in self.kernel.entries.items()]
        if self.interactions:
            lines.append("[interaction]")
            lines += [f"term = {t.label}" for t in self.interactions]
        if self.gge_terms:
            lines.append("[gge]")
            lines += [
                f"term = {','.join(map(str, g.sites))} | {g.coefficient!r}" for g in self.gge_terms
            ]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        header = f"L={self.lattice.L};boundary={self.lattice.boundary}\n"
        return hashlib.sha256((header + self.to_text()).encode()).hexdigest()[:16]


def parse_sites(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(s) for s in text.split(","))


def parse_interaction_term(text: str) -> InteractionTerm:
    """``creators | annihilators | coefficient``, e.g. ``0,1 | 1,0 | 1.0``."""
    parts = [p.strip() for p in text.split("|")]
    if len(parts) not in (2, 3):
        raise ValueError(f"expected 'creators | annihilators | coefficient', got {text!r}")
    coefficient = complex(parts[2]) if len(parts) == 3 else 1.0
    return InteractionTerm(parse_sites(parts[0]), parse_sites(parts[1]), coefficient)


def parse_gge_term(text: str) -> GGETerm:
    """``sites | coefficient``, e.g. ``0,1 | 1.0``."""
    parts = [p.strip() for p in text.split("|")]
    if len(parts) not in (1, 2):
        raise ValueError(f"expected 'sites | coefficient', got {text!r}")
    coefficient = float(parts[1]) if len(parts) == 2 else 1.0
    return GGETerm(parse_sites(parts[0]), coefficient)


# ============================================================================
# HELPERS
# ============================================================================

def translation_orbit(term: InteractionTerm, lattice: LatticeSpec) -> list[InteractionTerm]:
    """All distinct lattice translates of a term (in-range ones on open chains)."""
    seen: dict[InteractionTerm, None] = {}
    for shift in range(-lattice.L + 1, lattice.L) if not lattice.periodic else range(lattice.L):
        moved = term.translated(shift, lattice)
        if moved is not None:
            seen.setdefault(moved)
    return list(seen)


def pair_scattering_term(x: int, y: int, z: int, coefficient: complex, lattice: LatticeSpec) -> InteractionTerm:
    """a*_x a*_y a_z a_{x+y-z}: the position-sum-conserving two-body term."""
    w = lattice.wrap(x + y - z)
    if w is None:
        raise SiteIndexError(x + y - z, lattice.L)
    return InteractionTerm((x, y), (z, w), coefficient)


def density_density_orbit(lattice: LatticeSpec, coefficient: float = 1.0, distance: int = 1) -> list[InteractionTerm]:
    return translation_orbit(InteractionTerm((0, distance), (distance, 0), coefficient), lattice)


def default_benchmark(lattice: LatticeSpec, hopping: float = 1.0, interaction: float = 1.0) -> HamiltonianSpec:
    """Nearest-neighbor hopping plus n_x n_{x+1}."""
    return HamiltonianSpec(
        lattice,
        HoppingKernel.nearest_neighbor(hopping),
        tuple(density_density_orbit(lattice, interaction)),
    )


def dispersion(kernel: HoppingKernel, L: int) -> np.ndarray:
    """eps(k) = sum_d f(d) e^{-ikd} at k = 2 pi m / L."""
    k = 2 * np.pi * np.arange(L) / L
    eps = np.zeros(L, dtype=complex)
    for d, v in kernel.entries.items():
        eps += v * np.exp(-1j * k * d)
    return eps.real


def max_group_velocity(kernel: HoppingKernel, samples: int = 4096) -> float:
    """max_k |d eps / dk| on a fine grid."""
    k = np.linspace(-np.pi, np.pi, samples, endpoint=False)
    deps = np.zeros(samples, dtype=complex)
    for d, v in kernel.entries.items():
        deps += -1j * d * v * np.exp(-1j * k * d)
    return float(np.max(np.abs(deps.real)))


# ============================================================================
# BUILDERS
# ============================================================================

def _modes_for(lattice: LatticeSpec, modes: Sequence[Matrix] | None) -> Sequence[Matrix]:
    if modes is None:
        return annihilator_matrices(lattice.L)
    if len(modes) != lattice.L:
        raise PreconditionError(f"expected {lattice.L} mode operators, got {len(modes)}")
    return modes


def _wrap_result(
    matrix: ComplexArray, lattice: LatticeSpec, support: Iterable[int], label: str, space: LatticeSpec | None = None,
) -> FockOperator:
    if space is not None:
        return FockOperator(matrix, space, Parity.EVEN, frozenset(space.sites), label)
    return FockOperator(matrix, lattice, Parity.EVEN, frozenset(support), label)


def single_particle_matrix(kernel: HoppingKernel, lattice: LatticeSpec) -> ComplexArray:
    """h[x, y] = f(x - y), displacements folded mod L on rings."""
    kernel.validate()
    L = lattice.L
    h = np.zeros((L, L), dtype=complex)
    for x in range(L):
        for y in range(L):
            if lattice.periodic:
                h[x, y] = sum((v for d, v in kernel.entries.items() if (x - y - d) % L == 0), 0j)
            else:
                h[x, y] = kernel[x - y]
    return h


def second_quantize(h: ComplexArray, modes: Sequence[Matrix]) -> ComplexArray:
    """dGamma(h) = sum_{x,y} h[x,y] a*_x a_y."""
    n = modes[0].shape[0]
    out: Any = np.zeros((n, n), dtype=complex)
    for x, y in zip(*np.nonzero(h), strict=True):
        out = out + h[x, y] * (modes[x].conj().T @ modes[y])
    return to_dense(out)


def build_quasifree(
    kernel: HoppingKernel,
    lattice: LatticeSpec,
    modes: Sequence[Matrix] | None = None,
    space: LatticeSpec | None = None,
) -> FockOperator:
    h = single_particle_matrix(kernel, lattice)
    support = {int(x) for x in np.flatnonzero(np.abs(h).sum(axis=1))}
    return _wrap_result(second_quantize(h, _modes_for(lattice, modes)), lattice, support, "H0", space)


def build_interaction(
    terms: Sequence[InteractionTerm],
    lattice: LatticeSpec,
    modes: Sequence[Matrix] | None = None,
    *,
    validate: bool = True,
    tol: float = DEFAULTS.strict_tolerance,
    space: LatticeSpec | None = None,
) -> FockOperator:
    """Sum of terms, each completed by its adjoint unless already self-adjoint.

    ``validate=False`` skips the position-sum check (used to test
    non-conserving interactions); counts and site ranges are still checked.
    """
    mats = _modes_for(lattice, modes)
    n = mats[0].shape[0]
    H = np.zeros((n, n), dtype=complex)
    support: set[int] = set()
    for term in terms:
        if validate:
            term.validate_for(lattice)
        elif len(term.creators) != len(term.annihilators):
            raise GaugeInvarianceError(term.label)
        T = term.matrix(mats)
        if not np.any(T):
            logger.warning("interaction term %s vanishes identically", term.label)
            continue
        H += T if np.linalg.norm(T - T.conj().T) <= tol * np.linalg.norm(T) else T + T.conj().T
        support.update(term.creators, term.annihilators)
    return _wrap_result(H, lattice, support, "V", space)


def gge_diagonal(gge_terms: Sequence[GGETerm], lattice: LatticeSpec) -> np.ndarray:
    z = 1.0 - 2.0 * occupations(lattice.L)
    diag = np.zeros(lattice.dim)
    for term in gge_terms:
        for x in range(lattice.L):
            sites = [lattice.wrap(j + x) for j in term.sites]
            if any(s is None for s in sites):
                continue
            diag += term.coefficient * np.prod(z[:, sites], axis=1)
    return diag


def build_gge(gge_terms: Sequence[GGETerm], lattice: LatticeSpec) -> FockOperator:
    """sum_x prod_{j in Lambda} (1 - 2 n_{j+x}) f(Lambda); diagonal in the occupation basis."""
    terms = list(gge_terms)
    diag = gge_diagonal(terms, lattice)
    return _wrap_result(np.diag(diag.astype(complex)), lattice, lattice.sites if terms else (), "Hgge")


def build_hamiltonian(
    spec: HamiltonianSpec,
    modes: Sequence[Matrix] | None = None,
    *,
    validate: bool = True,
    space: LatticeSpec | None = None,
) -> FockOperator:
    """Quasifree + interaction + GGE parts of a spec on the given mode family.

    ``space`` names the lattice the mode matrices act on when it differs from
    ``spec.lattice`` (the doubled chain).
    """
    if validate:
        spec.validate()
    H = build_quasifree(spec.kernel, spec.lattice, modes, space)
    if spec.interactions:
        H = H + build_interaction(spec.interactions, spec.lattice, modes, validate=validate, space=space)
    if spec.gge_terms:
        if modes is not None:
            # sigma_z strings through the given modes: 1 - 2 a* a per site
            mats = _modes_for(spec.lattice, modes)
            n = mats[0].shape[0]
            zs = [np.eye(n) - 2 * to_dense(m.conj().T @ m) for m in mats]
            G = np.zeros((n, n), dtype=complex)
            for term in spec.gge_terms:
                for x in range(spec.lattice.L):
                    sites = [spec.lattice.wrap(j + x) for j in term.sites]
                    if any(s is None for s in sites):
                        continue
                    prod = np.eye(n, dtype=complex)
                    for s in sites:
                        prod = prod @ zs[s]
                    G += term.coefficient * prod
            H = H + _wrap_result(G, spec.lattice, spec.lattice.sites, "Hgge", space)
        else:
            H = H + build_gge(spec.gge_terms, spec.lattice)
    logger.debug("built Hamiltonian %s (L=%d)", spec.digest(), spec.lattice.L)
    return H.with_label("H")
