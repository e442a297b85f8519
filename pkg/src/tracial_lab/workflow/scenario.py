"""Scenario configuration: sectioned ``key = value`` text or the equivalent JSON.

    # hopping chain, commutator of two distant bilinears
    [scenario]
    name = quasifree_decay

    [lattice]
    L = 8
    boundary = open

    [kernel]
    1 = -1.0
    -1 = -1.0

    [operators]
    A = bilinear 0,1
    B = bilinear 6,7

    [time]
    t_end = 2.0
    steps = 21

Repeatable keys (``term``, ``orbit``, ``window``) accumulate into lists.
Every parse error names the offending line.
"""

from __future__ import annotations

import json
import logging
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from tracial_lab.core.errors import ConfigParseError, LabError
from tracial_lab.physics.car import Boundary, FockOperator, LatticeSpec, NormKind, Parity, jw_annihilator, number_density
from tracial_lab.physics.dynamics import suggest_t_max
from tracial_lab.physics.hamiltonian import (
    GGETerm,
    HamiltonianSpec,
    HoppingKernel,
    InteractionTerm,
    parse_gge_term,
    parse_interaction_term,
    translation_orbit,
)

logger = logging.getLogger(__name__)

REPEATABLE = frozenset({"term", "orbit", "window"})


class ScenarioName(StrEnum):
    QUASIFREE_DECAY = "quasifree_decay"
    INTERACTING_DECAY = "interacting_decay"
    LOCALIZATION = "localization"
    DOUBLED_CHECKS = "doubled_checks"
    TWIST_COVARIANCE = "twist_covariance"
    EIGENOPERATOR_SCAN = "eigenoperator_scan"
    MULTITIME = "multitime"
    SPECTRUM = "spectrum"


SCENARIO_DESCRIPTIONS: dict[ScenarioName, str] = {
    ScenarioName.QUASIFREE_DECAY: "Commutator norm of tau_t A with B under the hopping part, with the one-body oracle",
    ScenarioName.INTERACTING_DECAY: "Commutator norm under the full Hamiltonian next to its quasifree part",
    ScenarioName.LOCALIZATION: "Localization radius of tau_t A and exterior commutators",
    ScenarioName.DOUBLED_CHECKS: "Doubled-system identities: CAR cross relations, J, H_d, U/P, dP/dt",
    ScenarioName.TWIST_COVARIANCE: "Translation covariance of the twisted dynamics",
    ScenarioName.EIGENOPERATOR_SCAN: "Local eigenoperator residuals over nested windows",
    ScenarioName.MULTITIME: "Multi-time clustering defect in the tracial state",
    ScenarioName.SPECTRUM: "Bohr spectral measure of omega(A* tau_t A)",
}


class OperatorKind(StrEnum):
    U0 = "u0"
    BILINEAR = "bilinear"
    DENSITY = "density"
    ANNIHILATOR = "annihilator"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OperatorSelector(_Section):
    """``kind site,site,...``; u0 and annihilator use the uniform normalized smearing."""

    kind: OperatorKind
    sites: tuple[int, ...]

    @classmethod
    def parse(cls, text: str) -> OperatorSelector:
        kind, _, sites = text.strip().partition(" ")
        return cls(kind=OperatorKind(kind.strip()), sites=tuple(int(s) for s in sites.split(",") if s.strip()))

    @model_validator(mode="after")
    def check_arity(self) -> OperatorSelector:
        if not self.sites:
            raise ValueError(f"{self.kind} operator needs at least one site")
        if self.kind == OperatorKind.BILINEAR and len(self.sites) != 2:
            raise ValueError("bilinear operator needs exactly two sites")
        return self

    def build(self, lattice: LatticeSpec) -> FockOperator:
        for x in self.sites:
            lattice.check_site(x)
        label = f"{self.kind}[{','.join(map(str, self.sites))}]"
        if self.kind == OperatorKind.BILINEAR:
            x, y = self.sites
            hop = jw_annihilator(x, lattice).H @ jw_annihilator(y, lattice)
            return (hop + hop.H).with_label(label)
        if self.kind == OperatorKind.DENSITY:
            op = number_density(self.sites[0], lattice)
            for x in self.sites[1:]:
                op = op @ number_density(x, lattice)
            return op.with_label(label)
        f = np.zeros(lattice.L, dtype=complex)
        f[list(self.sites)] = 1.0 / np.sqrt(len(self.sites))
        a = FockOperator(
            sum(fx * jw_annihilator(x, lattice).matrix for x, fx in enumerate(f) if fx),
            lattice, Parity.ODD, frozenset(self.sites), label,
        )
        if self.kind == OperatorKind.ANNIHILATOR:
            return a
        return (a + a.H).with_label(label)

    def __str__(self) -> str:
        return f"{self.kind} {','.join(map(str, self.sites))}"


def _selector(value: Any) -> Any:
    if isinstance(value, str):
        return OperatorSelector.parse(value)
    return value


class ScenarioSection(_Section):
    name: ScenarioName
    description: str = ""


class LatticeSection(_Section):
    L: int
    boundary: Boundary = Boundary.OPEN

    @field_validator("L")
    @classmethod
    def check_L(cls, v: int) -> int:
        if v < 1:
            raise ValueError("L must be ≥ 1")
        return v

    def spec(self) -> LatticeSpec:
        return LatticeSpec(self.L, self.boundary)


class InteractionSection(_Section):
    term: list[str] = Field(default_factory=list)
    orbit: list[str] = Field(default_factory=list)
    validate_terms: bool = Field(default=True, alias="validate")

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


class GGESection(_Section):
    term: list[str] = Field(default_factory=list)


class OperatorsSection(_Section):
    A: OperatorSelector | None = None
    B: OperatorSelector | None = None
    C: OperatorSelector | None = None
    D: OperatorSelector | None = None

    @field_validator("A", "B", "C", "D", mode="before")
    @classmethod
    def parse_selector(cls, v: Any) -> Any:
        return _selector(v)


class TimeSection(_Section):
    t_start: float = 0.0
    t_end: float | None = None
    steps: int = Field(default=21, ge=1)

    @model_validator(mode="after")
    def check_order(self) -> TimeSection:
        if self.t_end is not None and self.steps > 1 and self.t_end <= self.t_start:
            raise ValueError("t_end must exceed t_start")
        return self


class DiagnosticSection(_Section):
    norm: NormKind = NormKind.SPECTRAL
    epsilon: float = Field(default=0.1, gt=0.0, lt=1.0)
    twist_k: int = 1
    window: list[str] = Field(default_factory=list)
    f0: str | None = None


class OutputSection(_Section):
    dir: Path | None = None


class ScenarioConfig(_Section):
    scenario: ScenarioSection
    lattice: LatticeSection
    kernel: dict[int, complex] = Field(default_factory=dict)
    interaction: InteractionSection = Field(default_factory=InteractionSection)
    gge: GGESection = Field(default_factory=GGESection)
    operators: OperatorsSection = Field(default_factory=OperatorsSection)
    time: TimeSection = Field(default_factory=TimeSection)
    diagnostic: DiagnosticSection = Field(default_factory=DiagnosticSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @field_validator("kernel", mode="before")
    @classmethod
    def parse_kernel(cls, v: Any) -> Any:
        if not isinstance(v, dict):
            return v
        out = {}
        for d, value in v.items():
            if isinstance(value, list | tuple) and len(value) == 2:
                value = complex(float(value[0]), float(value[1]))
            elif isinstance(value, str):
                value = complex(value.replace(" ", ""))
            out[int(d)] = value
        return out

    @property
    def name(self) -> ScenarioName:
        return self.scenario.name

    def lattice_spec(self) -> LatticeSpec:
        return self.lattice.spec()

    def interaction_terms(self) -> list[InteractionTerm]:
        lattice = self.lattice_spec()
        terms = [parse_interaction_term(t) for t in self.interaction.term]
        for text in self.interaction.orbit:
            terms += translation_orbit(parse_interaction_term(text), lattice)
        return terms

    def hamiltonian(self) -> HamiltonianSpec:
        gge: list[GGETerm] = [parse_gge_term(t) for t in self.gge.term]
        return HamiltonianSpec(
            self.lattice_spec(),
            HoppingKernel(self.kernel),
            tuple(self.interaction_terms()),
            tuple(gge),
        )

    def times(self) -> np.ndarray:
        t_end = self.time.t_end if self.time.t_end is not None else suggest_t_max(self.lattice.L)
        if self.time.steps == 1:
            return np.array([self.time.t_start])
        return np.linspace(self.time.t_start, t_end, self.time.steps)

    def windows(self) -> list[tuple[int, ...]]:
        return [tuple(int(s) for s in w.split(",")) for w in self.diagnostic.window]

    def to_text(self) -> str:
        """Canonical sectioned rendering, echoed into the run manifest."""
        lines = ["[scenario]", f"name = {self.scenario.name}"]
        if self.scenario.description:
            lines.append(f"description = {self.scenario.description}")
        lines += ["[lattice]", f"L = {self.lattice.L}", f"boundary = {self.lattice.boundary}"]
        lines.append("[kernel]")
        lines += [f"{d} = {v!r}" for d, v in sorted(self.kernel.items())]
        lines += ["[interaction]", f"validate = {str(self.interaction.validate_terms).lower()}"]
        lines += [f"term = {t}" for t in self.interaction.term]
        lines += [f"orbit = {t}" for t in self.interaction.orbit]
        lines.append("[gge]")
        lines += [f"term = {t}" for t in self.gge.term]
        lines.append("[operators]")
        for slot in ("A", "B", "C", "D"):
            sel = getattr(self.operators, slot)
            if sel is not None:
                lines.append(f"{slot} = {sel}")
        lines += ["[time]", f"t_start = {self.time.t_start!r}"]
        if self.time.t_end is not None:
            lines.append(f"t_end = {self.time.t_end!r}")
        lines.append(f"steps = {self.time.steps}")
        d = self.diagnostic
        lines += [
            "[diagnostic]",
            f"norm = {d.norm}",
            f"epsilon = {d.epsilon!r}",
            f"twist_k = {d.twist_k}",
        ]
        lines += [f"window = {w}" for w in d.window]
        if d.f0 is not None:
            lines.append(f"f0 = {d.f0}")
        return "\n".join(lines) + "\n"


# ============================================================================
# PARSING
# ============================================================================

_SECTIONS = frozenset(ScenarioConfig.model_fields)


def _tokenize(text: str) -> tuple[dict[str, dict[str, Any]], dict[tuple[str, ...], int]]:
    data: dict[str, dict[str, Any]] = {}
    lines: dict[tuple[str, ...], int] = {}
    section: str | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigParseError(f"malformed section header {raw.strip()!r}", line=lineno)
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigParseError(f"unknown section [{section}]", line=lineno)
            if section in data:
                raise ConfigParseError(f"duplicate section [{section}]", line=lineno)
            data[section] = {}
            lines[(section,)] = lineno
            continue
        if section is None:
            raise ConfigParseError("key outside of any [section]", line=lineno)
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if key in REPEATABLE:
            data[section].setdefault(key, []).append(value)
            lines.setdefault((section, key), lineno)
            lines[(section, key, str(len(data[section][key]) - 1))] = lineno
            continue
        if key in data[section]:
            raise ConfigParseError(f"duplicate key '{key}' in [{section}]", line=lineno)
        data[section][key] = value
        lines[(section, key)] = lineno
    return data, lines


def _error_line(loc: tuple[Any, ...], lines: dict[tuple[str, ...], int]) -> int | None:
    parts = tuple(str(p) for p in loc)
    for n in range(len(parts), 0, -1):
        if parts[:n] in lines:
            return lines[parts[:n]]
    return None


def _clean(msg: str) -> str:
    return msg.removeprefix("Value error, ")


def _build(data: dict[str, Any], lines: dict[tuple[str, ...], int]) -> ScenarioConfig:
    try:
        config = ScenarioConfig.model_validate(data)
    except PydanticValidationError as e:
        err = e.errors()[0]
        loc = tuple(err["loc"])
        where = ".".join(str(p) for p in loc)
        if err["type"] == "missing":
            raise ConfigParseError(
                f"missing required key '{loc[-1]}'" + (f" in [{loc[0]}]" if len(loc) > 1 else " section"),
                line=_error_line(loc[:-1], lines) if len(loc) > 1 else None,
            ) from e
        if err["type"] == "extra_forbidden":
            raise ConfigParseError(f"unknown key '{loc[-1]}' in [{loc[0]}]", line=_error_line(loc, lines)) from e
        raise ConfigParseError(f"{where}: {_clean(err['msg'])}", line=_error_line(loc, lines)) from e

    try:
        spec = config.hamiltonian()
        if config.interaction.validate_terms:
            spec.validate()
        else:
            spec.kernel.validate()
    except ValueError as e:
        raise ConfigParseError(str(e), line=lines.get(("interaction",)) or lines.get(("gge",))) from e
    except LabError:
        raise
    logger.debug("parsed scenario %s (L=%d, digest %s)", config.name, config.lattice.L, spec.digest())
    return config


def parse_config(text: str) -> ScenarioConfig:
    """Parse a scenario from sectioned text, or from JSON when the text starts with ``{``."""
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigParseError(f"invalid JSON: {e.msg}", line=e.lineno) from e
        if not isinstance(data, dict):
            raise ConfigParseError("JSON config must be an object")
        return _build(data, {})
    data, lines = _tokenize(text)
    return _build(data, lines)


def load_config(path: Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigParseError(f"cannot read {path}: {e.strerror}") from e
    return parse_config(text)
