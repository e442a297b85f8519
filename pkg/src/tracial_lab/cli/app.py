"""
Root click group; commands are registered from plugins.
"""
import logging
import sys
from pathlib import Path

import click
from rich.logging import RichHandler

from tracial_lab import __version__
from tracial_lab.config import get_settings, reload_settings
from tracial_lab.plugins.loader import PluginLoader


def configure_logging(level: str, rich_tracebacks: bool = True) -> None:
    """Route library logging through a single stderr RichHandler."""
    root = logging.getLogger("tracial_lab")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = RichHandler(rich_tracebacks=rich_tracebacks, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False


@click.group()
@click.version_option(version=__version__, prog_name="tlab")
@click.option(
    "--settings",
    "settings_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Path to a YAML/JSON settings file",
)
@click.option("--verbose", "-v", count=True, help="-v for INFO, -vv for DEBUG")
def cli(settings_file: Path | None, verbose: int) -> None:
    """tlab - finite-lattice CAR algebra laboratory."""
    if settings_file:
        try:
            reload_settings(settings_file)
        except Exception as e:
            click.echo(
                click.style(f"❌ Settings Error: {e}", fg="red"),
                err=True,
            )
            sys.exit(1)
    settings = get_settings()
    level = {0: settings.logging.level, 1: "INFO"}.get(verbose, "DEBUG")
    configure_logging(level, settings.logging.rich_tracebacks)


_plugin_loader = PluginLoader()
_plugin_loader.discover_plugins()
_plugin_loader.register_commands(cli)


def main() -> None:  # pragma: no cover
    """Entry point for the tlab script."""
    cli()


if __name__ == "__main__":  # pragma: no cover
    main()
