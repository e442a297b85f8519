"""Run the built-in invariant suites."""

import click
from click.exceptions import Exit
from rich.console import Console
from rich.table import Table

from tracial_lab.config import get_settings
from tracial_lab.core.error_handler import handle_cli_error
from tracial_lab.plugins.base import BaseCommandPlugin, CommandCategory
from tracial_lab.workflow.checks import SUITES, CheckLevel, CheckReport, run_checks

_STATUS_STYLE = {"pass": "green", "FAIL": "bold red", "report": "dim"}


def _display_report(console: Console, report: CheckReport) -> None:
    table = Table(title=f"Invariant checks ({report.level})", show_header=True, header_style="bold")
    table.add_column("suite", style="cyan")
    table.add_column("check")
    table.add_column("residual", justify="right")
    table.add_column("tolerance", justify="right")
    table.add_column("status")
    for r in report.results:
        tol = "-" if r.tolerance is None else f"{'>' if r.expect_above else '≤'} {r.tolerance:.1e}"
        style = _STATUS_STYLE[r.status]
        table.add_row(r.suite, r.name, f"{r.residual:.3e}", tol, f"[{style}]{r.status}[/{style}]")
    console.print(table)
    for r in report.failures:
        if r.detail:
            console.print(f"[red]✗ {r.suite}:[/red] {r.detail}")

    total = len(report.results)
    failed = len(report.failures)
    if failed:
        console.print(f"\n[bold red]{failed} of {total} checks failed[/bold red] ({report.wall_time_seconds:.1f}s)")
    else:
        console.print(f"\n[bold green]All {total} checks passed[/bold green] ({report.wall_time_seconds:.1f}s)")


@click.command(name="check")
@click.option("--full", is_flag=True, default=False, help="Run suites up to L = 6 (default: L ≤ 3)")
@click.option(
    "--suite",
    "-s",
    "suites",
    multiple=True,
    type=click.Choice(sorted(SUITES)),
    help="Only run the named suite (repeatable)",
)
@click.option("--threads", "-j", type=click.IntRange(1, 64), default=None, help="Worker threads")
def check(full: bool, suites: tuple[str, ...], threads: int | None) -> None:
    """
    Run the invariant suites and print per-invariant residuals.

    Exits non-zero when any check fails.

    Examples:

        \b
        tlab check
        tlab check --full -j 4
        tlab check -s car -s doubled
    """
    console = Console()
    try:
        report = run_checks(
            CheckLevel.FULL if full else CheckLevel.FAST,
            get_settings(),
            threads=threads,
            suites=list(suites) or None,
            console=Console(stderr=True),
        )
    except Exception as e:
        handle_cli_error(e)
        return
    _display_report(console, report)
    if not report.passed:
        raise Exit(1)


plugin = BaseCommandPlugin(
    "check", CommandCategory.VERIFICATION, "Run invariant suites (fast: L ≤ 3, --full: L ≤ 6)", check,
)
