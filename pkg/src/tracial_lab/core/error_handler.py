"""Error handling for CLI commands with contextual suggestions.

Maps LabError categories to readable messages and process exit codes.
"""

import sys

import click

from tracial_lab.core.errors import (
    ConfigParseError,
    ConfigurationError,
    LabError,
    NumericalError,
    ResourceLimitError,
    ValidationError,
)


def _print_suggestion(error: LabError) -> None:
    if error.suggestion:
        click.echo(f"\n💡 {error.suggestion}", err=True)


def handle_parse_error(error: ConfigParseError) -> None:
    """Show the offending config line."""
    click.secho("\n❌ Config Parse Error", fg="red", bold=True, err=True)
    click.echo(f"\n{error.message}", err=True)
    click.echo("\n💡 Config grammar:", err=True)
    click.echo("   • [section] headers, one `key = value` per line", err=True)
    click.echo("   • `#` starts a comment", err=True)
    click.echo("   • run `tlab list-scenarios` for valid scenario names", err=True)
    sys.exit(error.exit_code)


def handle_resource_error(error: ResourceLimitError) -> None:
    """Show the memory budget that was exceeded."""
    click.secho("\n❌ Resource Limit Exceeded", fg="red", bold=True, err=True)
    click.echo(f"\n{error.message}", err=True)
    _print_suggestion(error)
    click.echo("   • TLAB_NUMERICS__MAX_SITES / TLAB_NUMERICS__MAX_DOUBLED_SITES", err=True)
    sys.exit(error.exit_code)


def handle_numerical_error(error: NumericalError) -> None:
    """A verified identity failed; this indicates a numerical problem, not bad input."""
    click.secho("\n❌ Numerical Check Failed", fg="red", bold=True, err=True)
    click.echo(f"\n{error}", err=True)
    if error.context:
        for key, value in sorted(error.context.items()):
            click.echo(f"   {key}: {value}", err=True)
    sys.exit(error.exit_code)


def handle_validation_error(error: ConfigurationError | ValidationError) -> None:
    """Show rejected input with the reason."""
    click.secho("\n❌ Invalid Input", fg="red", bold=True, err=True)
    click.echo(f"\n{error.message}", err=True)
    _print_suggestion(error)
    sys.exit(error.exit_code)


def handle_general_error(error: Exception) -> None:
    """Show helpful message for unexpected errors."""
    click.secho("\n❌ Unexpected Error", fg="red", bold=True, err=True)
    click.echo(f"\n{error}", err=True)
    click.echo("\n💡 Troubleshooting:", err=True)
    click.echo("   • Check the command syntax: tlab --help", err=True)
    click.echo("   • Re-run with --verbose for a full log", err=True)
    sys.exit(error.exit_code if isinstance(error, LabError) else 1)


def handle_cli_error(error: Exception) -> None:
    """Central error handler that dispatches to specific handlers.

    Args:
        error: The exception to handle.
    """
    if isinstance(error, ConfigParseError):
        handle_parse_error(error)
    elif isinstance(error, ResourceLimitError):
        handle_resource_error(error)
    elif isinstance(error, NumericalError):
        handle_numerical_error(error)
    elif isinstance(error, ConfigurationError | ValidationError):
        handle_validation_error(error)
    else:
        handle_general_error(error)
