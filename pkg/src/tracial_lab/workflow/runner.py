"""Execute a scenario and write its CSV artifacts and manifest.

Every scenario handler returns a :class:`ScenarioResult`; the runner owns the
files. Floats are written with ``repr`` (shortest round-trip form) and rows
in a fixed order, so identical configs give byte-identical CSVs regardless
of the thread count.
"""

from __future__ import annotations

import csv
import logging
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
from rich.console import Console

from tracial_lab.config.manager import get_settings
from tracial_lab.config.models import Settings
from tracial_lab.core.errors import handle_error
from tracial_lab.core.models import NumericDefaults
from tracial_lab.physics.car import (
    CarPolynomial,
    FockOperator,
    NormKind,
    Parity,
    annihilator_matrices,
)
from tracial_lab.physics.diagnostics import (
    DecayCurve,
    Quantity,
    anticommutator_decay,
    commutator_decay,
    contrast_minima,
    localization_radius,
    multitime_cluster,
    quasifree_commutator_oracle,
    recurrence_window,
)
from tracial_lab.physics.doubled import (
    bilinear_expansion_residual,
    build_doubled,
    build_U_and_P,
    doubled_hamiltonian_report,
    p_time_derivative,
    quartic_doubling_residual,
    tracial_expectation,
    trace_property_residual,
)
from tracial_lab.physics.dynamics import TracialState, correlation_spectrum, eigendecompose, heisenberg_series
from tracial_lab.physics.exceptions import UnsupportedBoundaryError
from tracial_lab.physics.hamiltonian import (
    HamiltonianSpec,
    build_hamiltonian,
    max_group_velocity,
    single_particle_matrix,
)
from tracial_lab.physics.twist import (
    TwistAngle,
    covariance_check,
    eigenoperator_scan,
    residual_rows,
    twist_locality_distance,
)
from tracial_lab.workflow.parallel import ParallelExecutor
from tracial_lab.workflow.scenario import OperatorKind, OperatorSelector, ScenarioConfig, ScenarioName
from tracial_lab.workflow.state import RunArtifact, RunManifest

logger = logging.getLogger(__name__)

Row = Sequence[Any]


@dataclass
class Table:
    header: tuple[str, ...]
    rows: list[Row]


@dataclass
class ScenarioResult:
    tables: dict[str, Table] = field(default_factory=dict)
    summary: dict[str, float] = field(default_factory=dict)
    t_max: float | None = None
    flags: list[str] = field(default_factory=list)

    def curve(self, name: str, times: NDArray[np.float64], columns: dict[str, NDArray[Any]]) -> None:
        header = ("t", *columns)
        rows = [(float(t), *(col[i] for col in columns.values())) for i, t in enumerate(times)]
        self.tables[f"curve_{name}.csv"] = Table(header, rows)

    def report(self, name: str, header: tuple[str, ...], rows: list[Row]) -> None:
        self.tables[f"report_{name}.csv"] = Table(header, rows)


@dataclass
class RunContext:
    defaults: NumericDefaults
    executor: ParallelExecutor
    threads: int


def _fmt(value: Any) -> str:
    if isinstance(value, bool | np.bool_):
        return "1" if value else "0"
    if isinstance(value, int | np.integer):
        return str(int(value))
    if isinstance(value, float | np.floating):
        return repr(float(value))
    return str(value)


@handle_error("ARTIFACT_WRITE_FAILED", recoverable=False)
def write_table(path: Path, table: Table) -> None:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_fmt(v) for v in row])


def _fan_out(
    ctx: RunContext, fn: Callable[[NDArray[np.float64]], NDArray[np.float64]], times: NDArray[np.float64], label: str,
) -> NDArray[np.float64]:
    """Evaluate ``fn`` on contiguous chunks of the grid and reassemble in grid order."""
    chunks = [c for c in np.array_split(times, ctx.threads) if c.size]
    results = ctx.executor.run(
        [partial(fn, c) for c in chunks],
        [f"{label} t∈[{c[0]:g}, {c[-1]:g}]" for c in chunks],
    )
    return np.concatenate(ctx.executor.filter_results(results, raise_errors=True))


def _operator(config: ScenarioConfig, slot: str, default: OperatorSelector) -> tuple[OperatorSelector, FockOperator]:
    selector = getattr(config.operators, slot) or default
    return selector, selector.build(config.lattice_spec())


def _sel(kind: OperatorKind, *sites: int) -> OperatorSelector:
    return OperatorSelector(kind=kind, sites=sites)


def _decay(
    ctx: RunContext, A: FockOperator, B: FockOperator, eig: Any, times: NDArray[np.float64], norm: NormKind, label: str,
) -> NDArray[np.float64]:
    decay = anticommutator_decay if A.parity == Parity.ODD and B.parity == Parity.ODD else commutator_decay
    return _fan_out(ctx, lambda c: decay(A, B, eig, c, norm).values, times, label)


def _one_body(selector: OperatorSelector, L: int) -> NDArray[np.complex128] | None:
    K = np.zeros((L, L), dtype=complex)
    if selector.kind == OperatorKind.BILINEAR:
        x, y = selector.sites
        K[x, y] += 1.0
        K[y, x] += 1.0
        return K
    if selector.kind == OperatorKind.DENSITY and len(selector.sites) == 1:
        K[selector.sites[0], selector.sites[0]] = 1.0
        return K
    return None


def _window(eig: Any, spec: HamiltonianSpec, result: ScenarioResult) -> float:
    window = recurrence_window(eig, spec.lattice.L, max_group_velocity(spec.kernel))
    result.t_max = window.t_max
    return window.t_max


def _flag_window(result: ScenarioResult, times: NDArray[np.float64], t_max: float) -> None:
    curve = DecayCurve(times, np.zeros_like(times), Quantity.COMMUTATOR_NORM, t_max=t_max)
    if curve.window_exceeded and "window_exceeded" not in result.flags:
        result.flags.append("window_exceeded")


# ============================================================================
# SCENARIOS
# ============================================================================

def _quasifree_decay(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    L = config.lattice.L
    spec = config.hamiltonian().quasifree_part()
    sel_a, A = _operator(config, "A", _sel(OperatorKind.BILINEAR, 0, 1))
    sel_b, B = _operator(config, "B", _sel(OperatorKind.BILINEAR, L - 2, L - 1))
    eig = eigendecompose(build_hamiltonian(spec))
    times = config.times()
    norm = config.diagnostic.norm

    result = ScenarioResult()
    t_max = _window(eig, spec, result)
    columns: dict[str, NDArray[Any]] = {"value": _decay(ctx, A, B, eig, times, norm, "quasifree")}
    KA, KB = _one_body(sel_a, L), _one_body(sel_b, L)
    if KA is not None and KB is not None:
        oracle = quasifree_commutator_oracle(KA, KB, single_particle_matrix(spec.kernel, spec.lattice), times, norm)
        columns["oracle"] = oracle
        result.summary["oracle_deviation"] = float(np.max(np.abs(oracle - columns["value"])))
    result.curve("quasifree", times, columns)
    result.summary["max_value"] = float(np.max(columns["value"]))
    _flag_window(result, times, t_max)
    return result


def _interacting_decay(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    L = config.lattice.L
    spec = config.hamiltonian()
    _, A = _operator(config, "A", _sel(OperatorKind.BILINEAR, 0, 1))
    _, B = _operator(config, "B", _sel(OperatorKind.BILINEAR, L - 2, L - 1))
    eig = eigendecompose(build_hamiltonian(spec, validate=config.interaction.validate_terms))
    eig_free = eigendecompose(build_hamiltonian(spec.quasifree_part()))
    times = config.times()
    norm = config.diagnostic.norm

    result = ScenarioResult()
    t_max = _window(eig, spec, result)
    interacting = _decay(ctx, A, B, eig, times, norm, "interacting")
    quasifree = _decay(ctx, A, B, eig_free, times, norm, "quasifree")
    result.curve("interacting", times, {"interacting": interacting, "quasifree": quasifree})
    min_int, min_free = contrast_minima(
        DecayCurve(times, interacting, Quantity.COMMUTATOR_NORM),
        DecayCurve(times, quasifree, Quantity.COMMUTATOR_NORM),
        float(times[0]),
        min(float(times[-1]), t_max),
    )
    result.summary.update({
        "min_interacting": min_int,
        "min_quasifree": min_free,
        "contrast_holds": float(min_int >= min_free),
    })
    _flag_window(result, times, t_max)
    return result


def _localization(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    L = config.lattice.L
    spec = config.hamiltonian()
    _, A = _operator(config, "A", _sel(OperatorKind.U0, 0))
    _, B = _operator(config, "B", _sel(OperatorKind.DENSITY, L - 1))
    eig = eigendecompose(build_hamiltonian(spec, validate=config.interaction.validate_terms))
    times = config.times()
    eps = config.diagnostic.epsilon

    result = ScenarioResult()
    t_max = _window(eig, spec, result)
    radius = _fan_out(ctx, lambda c: localization_radius(A, eig, c, eps).values, times, "radius")
    exterior = _decay(ctx, A, B, eig, times, config.diagnostic.norm, "exterior")
    result.curve("localization", times, {"radius": radius, "exterior_commutator": exterior})
    result.summary.update({
        "radius_min": float(radius.min()),
        "radius_max": float(radius.max()),
        "exterior_max": float(exterior.max()),
    })
    _flag_window(result, times, t_max)
    return result


def _doubled_checks(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    L = config.lattice.L
    tol = ctx.defaults.tolerance
    system = build_doubled(L, ctx.defaults.max_doubled_sites, ctx.defaults.strict_tolerance)
    spec = config.hamiltonian()
    rows: dict[str, float] = {f"doubled:{k}": v for k, v in system.validation.items()}

    report = doubled_hamiltonian_report(spec, system, tol=tol)
    rows.update({f"H_d:{k}": v for k, v in report.checks.items()})

    rng = np.random.default_rng(0)
    f = rng.normal(size=L) + 1j * rng.normal(size=L)
    g = rng.normal(size=L) + 1j * rng.normal(size=L)
    rows["bilinear_expansion"] = bilinear_expansion_residual(system, f, g)
    rows["quartic_doubling"] = quartic_doubling_residual(system, 0, L - 1)
    rows["trace_property"] = trace_property_residual(system, rng)
    phys_modes = annihilator_matrices(L)
    tracial = 0.0
    for _ in range(20):
        poly = CarPolynomial.random(L, rng)
        direct = np.trace(poly.matrix(phys_modes)) / 2**L
        tracial = max(tracial, abs(tracial_expectation(poly.matrix(system.a_ops), system) - direct))
    rows["tracial_vs_trace"] = tracial

    f0 = np.zeros(L, dtype=complex)
    sites = [int(s) for s in config.diagnostic.f0.split(",")] if config.diagnostic.f0 else [0]
    f0[sites] = 1.0 / np.sqrt(len(sites))
    up = build_U_and_P(system, f0, tol=tol)
    rows.update({f"UP:{k}": v for k, v in up.checks.items()})
    rows["UP:closed_form_deviation"] = up.closed_form_deviation
    rows["UP:closed_form_max_eigenvalue"] = up.closed_form_max_eigenvalue

    eig_d = eigendecompose(report.operator)
    _, deriv = p_time_derivative(up.P, report.operator, eig_d, fd_step=ctx.defaults.fd_step, tol=tol)
    rows["dP:finite_difference_residual"] = deriv.finite_difference_residual
    rows["dP:kernel_dimension"] = float(deriv.kernel_dimension)
    rows["dP:min_nonzero"] = deriv.min_nonzero

    result = ScenarioResult(summary=rows)
    result.report("doubled", ("quantity", "value"), [(k, v) for k, v in rows.items()])
    result.report("dp_spectrum", ("index", "eigenvalue"), [(i, float(v)) for i, v in enumerate(deriv.eigenvalues)])
    return result


def _twist_covariance(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    spec = config.hamiltonian()
    lattice = spec.lattice
    if not lattice.periodic:
        raise UnsupportedBoundaryError("twist_covariance")
    angle = TwistAngle.from_index(config.diagnostic.twist_k, lattice.L)
    times = [float(t) for t in config.times()]
    cov = covariance_check(angle, spec, times, validate=config.interaction.validate_terms)

    result = ScenarioResult(summary={
        "translation_violation": cov.translation_violation,
        "interaction_twist_violation": cov.interaction_twist_violation,
        "max_violation": cov.max_violation,
    })
    result.report("covariance", ("quantity", "value"), list(result.summary.items()))
    _, A = _operator(config, "A", _sel(OperatorKind.BILINEAR, 0, 1))
    result.report("twist_locality", ("k", "g", "distance"), [
        (k, TwistAngle.from_index(k, lattice.L).g, twist_locality_distance(A, TwistAngle.from_index(k, lattice.L)))
        for k in range(lattice.L)
    ])
    return result


def _eigenoperator_scan(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    L = config.lattice.L
    spec = config.hamiltonian()
    eig = eigendecompose(build_hamiltonian(spec, validate=config.interaction.validate_terms))
    windows = config.windows() or [tuple(range(n)) for n in range(1, min(L, 3) + 1)]
    results = eigenoperator_scan(windows, eig)
    rows = residual_rows(results)
    result = ScenarioResult()
    result.report("eigenoperators", ("window", "residual", "E", "minimizer"), list(rows))
    for r in results:
        result.summary[f"residual[{','.join(map(str, r.window))}]"] = r.residual
    if any(r.full_window for r in results):
        result.flags.append("full_window")
    return result


def _multitime(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    L = config.lattice.L
    spec = config.hamiltonian()
    _, A = _operator(config, "A", _sel(OperatorKind.DENSITY, 0))
    _, B = _operator(config, "B", _sel(OperatorKind.DENSITY, L - 1))
    C = _operator(config, "C", _sel(OperatorKind.DENSITY, 0))[1]
    D = _operator(config, "D", _sel(OperatorKind.DENSITY, L - 1))[1]
    eig = eigendecompose(build_hamiltonian(spec, validate=config.interaction.validate_terms))
    times = config.times()

    result = ScenarioResult()
    t_max = _window(eig, spec, result)
    report = multitime_cluster(A, B, C, D, eig, TracialState(A.dim), times)
    result.curve("multitime", times, {
        "defect": report.defect,
        "product": report.product,
        "bound": np.full(times.shape, report.bound),
    })
    result.summary.update({
        "defect_max": float(report.defect.max()),
        "product_max": float(report.product.max()),
        "bound": report.bound,
    })
    _flag_window(result, times, t_max)
    return result


def _spectrum(config: ScenarioConfig, ctx: RunContext) -> ScenarioResult:
    spec = config.hamiltonian()
    _, A = _operator(config, "A", _sel(OperatorKind.U0, 0))
    eig = eigendecompose(build_hamiltonian(spec, validate=config.interaction.validate_terms))
    state = TracialState(A.dim)
    measure = correlation_spectrum(A, A, eig, state)
    times = config.times()
    resampled = measure.evaluate(times)
    direct = np.array([state.expect(A.matrix.conj().T @ At) for At in heisenberg_series(A, eig, times)])

    result = ScenarioResult()
    result.report("spectrum", ("frequency", "weight_re", "weight_im"), [
        (w, c.real, c.imag) for w, c in measure.atoms
    ])
    result.curve("spectrum", times, {"re": resampled.real, "im": resampled.imag})
    result.summary.update({
        "atoms": float(len(measure.frequencies)),
        "total_weight": measure.total_weight.real,
        "nonnegative": float(measure.is_nonnegative()),
        "resample_deviation": float(np.max(np.abs(resampled - direct))),
    })
    return result


HANDLERS: dict[ScenarioName, Callable[[ScenarioConfig, RunContext], ScenarioResult]] = {
    ScenarioName.QUASIFREE_DECAY: _quasifree_decay,
    ScenarioName.INTERACTING_DECAY: _interacting_decay,
    ScenarioName.LOCALIZATION: _localization,
    ScenarioName.DOUBLED_CHECKS: _doubled_checks,
    ScenarioName.TWIST_COVARIANCE: _twist_covariance,
    ScenarioName.EIGENOPERATOR_SCAN: _eigenoperator_scan,
    ScenarioName.MULTITIME: _multitime,
    ScenarioName.SPECTRUM: _spectrum,
}


# ============================================================================
# RUNNER
# ============================================================================

def resolve_output_dir(config: ScenarioConfig, settings: Settings, out_dir: Path | None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if config.output.dir is not None:
        return config.output.dir
    return settings.run.output_dir / str(config.name)


def run_scenario(
    config: ScenarioConfig,
    settings: Settings | None = None,
    *,
    out_dir: Path | None = None,
    threads: int | None = None,
    console: Console | None = None,
) -> RunManifest:
    """Run a scenario, write ``curve_*.csv``/``report_*.csv`` and ``manifest.json``.

    On failure every file written by this run is removed before the error
    propagates.
    """
    settings = settings or get_settings()
    defaults = settings.numeric_defaults()
    n_threads = threads or settings.run.threads
    config.lattice_spec().check_budget(defaults.max_sites)
    ctx = RunContext(
        defaults=defaults,
        executor=ParallelExecutor(n_threads, console=console, show_progress=settings.run.show_progress),
        threads=n_threads,
    )
    run_dir = resolve_output_dir(config, settings, out_dir)
    created_dir = not run_dir.exists()
    written: list[Path] = []

    logger.info("running %s (L=%d) into %s with %d thread(s)", config.name, config.lattice.L, run_dir, n_threads)
    start = time.perf_counter()
    try:
        result = HANDLERS[config.name](config, ctx)
        run_dir.mkdir(parents=True, exist_ok=True)
        for name, table in result.tables.items():
            path = run_dir / name
            written.append(path)
            write_table(path, table)
        lattice = config.lattice_spec()
        manifest = RunManifest(
            artifact_version=settings.run.artifact_version,
            scenario=str(config.name),
            config=config.to_text(),
            hamiltonian_digest=config.hamiltonian().digest(),
            lattice={"L": lattice.L, "boundary": str(lattice.boundary)},
            t_max=result.t_max,
            wall_time_seconds=round(time.perf_counter() - start, 6),
            summary=result.summary,
            flags=result.flags,
            artifacts=[RunArtifact.from_file(p) for p in written],
        )
        written.append(run_dir / "manifest.json")
        manifest.write(run_dir)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        if created_dir and run_dir.exists() and not any(run_dir.iterdir()):
            run_dir.rmdir()
        logger.debug("removed %d partial file(s) from %s", len(written), run_dir)
        raise
    logger.info("%s finished in %.2fs", config.name, manifest.wall_time_seconds)
    return manifest
