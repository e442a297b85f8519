"""List the scenarios a config can name and the configs available for each."""

import logging
from collections import defaultdict
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from tracial_lab.config.manager import get_settings, scenario_config_files
from tracial_lab.core.errors import LabError
from tracial_lab.plugins.base import BaseCommandPlugin, CommandCategory
from tracial_lab.workflow.scenario import SCENARIO_DESCRIPTIONS, ScenarioName, load_config

logger = logging.getLogger(__name__)


def configs_by_scenario(paths: list[Path]) -> dict[ScenarioName, list[str]]:
    """Group config file stems by the scenario they name; unparsable files are skipped."""
    grouped: dict[ScenarioName, list[str]] = defaultdict(list)
    for path in paths:
        try:
            grouped[load_config(path).name].append(path.stem)
        except LabError as e:
            logger.warning("skipping %s: %s", path, e)
    return grouped


@click.command(name="list-scenarios")
def list_scenarios() -> None:
    """Print every scenario name, a one-line description and the configs under run.config_dir."""
    config_dir = get_settings().run.config_dir
    available = configs_by_scenario(scenario_config_files())
    table = Table(title="Scenarios", show_header=True, header_style="bold")
    table.add_column("name", style="cyan", no_wrap=True)
    table.add_column("description")
    table.add_column(f"configs in {config_dir}", style="green")
    for name in ScenarioName:
        table.add_row(str(name), SCENARIO_DESCRIPTIONS[name], ", ".join(available.get(name, [])) or "-")
    Console().print(table)


plugin = BaseCommandPlugin(
    "list-scenarios", CommandCategory.SCENARIOS, "List available scenarios and matching configs", list_scenarios,
)
