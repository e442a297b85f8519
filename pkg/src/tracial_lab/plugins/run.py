"""Run a scenario config and write its artifacts."""

from pathlib import Path

import click
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from tracial_lab.config import get_settings
from tracial_lab.core.error_handler import handle_cli_error
from tracial_lab.plugins.base import SCENARIO_CONFIG, BaseCommandPlugin, CommandCategory
from tracial_lab.workflow.runner import resolve_output_dir, run_scenario
from tracial_lab.workflow.scenario import load_config
from tracial_lab.workflow.state import RunManifest


def _display_manifest(console: Console, manifest: RunManifest, run_dir: Path) -> None:
    t_max = "∞" if manifest.t_max is None or manifest.t_max == float("inf") else f"{manifest.t_max:.6g}"
    console.print(Panel(
        f"[cyan]Scenario:[/cyan] {manifest.scenario}\n"
        f"[cyan]Lattice:[/cyan] L={manifest.lattice['L']} ({manifest.lattice['boundary']})\n"
        f"[cyan]Hamiltonian:[/cyan] {manifest.hamiltonian_digest}\n"
        f"[dim]T_max:[/dim] {t_max}   [dim]wall time:[/dim] {manifest.wall_time_seconds:.2f}s",
        title="✓ Run complete",
        border_style="green",
    ))

    if manifest.summary:
        table = Table(title="Summary", show_header=True, header_style="bold")
        table.add_column("quantity")
        table.add_column("value", justify="right")
        for key, value in manifest.summary.items():
            table.add_row(key, f"{value:.6g}")
        console.print(table)

    for flag in manifest.flags:
        console.print(f"[yellow]⚠ {flag}[/yellow]")

    console.print(f"\n[dim]Artifacts in {run_dir}:[/dim]")
    for artifact in manifest.artifacts:
        console.print(f"  • {artifact.name} [dim]({artifact.size_bytes} bytes)[/dim]")


@click.command(name="run")
@click.argument("config_file", type=SCENARIO_CONFIG)
@click.option(
    "--threads",
    "-j",
    type=click.IntRange(1, 64),
    default=None,
    help="Worker threads (default: settings run.threads)",
)
@click.option(
    "--out",
    "-o",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Artifact directory (overrides [output] dir in the config)",
)
def run(config_file: Path, threads: int | None, out_dir: Path | None) -> None:
    """
    Run a scenario described by a sectioned config file.

    Writes curve_*.csv / report_*.csv plus manifest.json with checksums.
    JSON configs are accepted as well. A bare name such as ``quasifree``
    is looked up as quasifree.conf or quasifree.json under run.config_dir.

    Examples:

        \b
        # Quasifree commutator decay
        tlab run configs/quasifree.conf

        \b
        # Same config, found under run.config_dir
        tlab run quasifree

        \b
        # Four threads, explicit output directory
        tlab run configs/doubled.conf -j 4 --out runs/doubled
    """
    console = Console()
    try:
        config = load_config(config_file)
        settings = get_settings()
        run_dir = resolve_output_dir(config, settings, out_dir)
        manifest = run_scenario(
            config, settings, out_dir=run_dir, threads=threads, console=Console(stderr=True),
        )
        _display_manifest(console, manifest, run_dir)
    except Exception as e:
        handle_cli_error(e)


plugin = BaseCommandPlugin(
    "run", CommandCategory.SCENARIOS, "Run a scenario config and write CSV artifacts", run,
)
