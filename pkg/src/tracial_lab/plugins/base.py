"""Command plugin interface and the scenario config parameter shared by commands.

Every command module under ``tracial_lab.plugins`` exposes a module-level
``plugin``; the loader groups them by :class:`CommandCategory` in help.
"""

from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Any, Protocol, runtime_checkable

import click

from tracial_lab.config.manager import resolve_scenario_path


class CommandCategory(StrEnum):
    SCENARIOS = "Scenarios"
    VERIFICATION = "Verification"


@runtime_checkable
class CommandPlugin(Protocol):
    """What the loader needs: a name, a help category, a help line and the command."""

    name: str
    category: str
    help_text: str

    def get_command(self) -> click.Command: ...


@dataclass(frozen=True)
class BaseCommandPlugin:
    """A plugin wrapping a ready-made click command.

    Subclasses that build their command lazily override :meth:`get_command`.
    """

    name: str
    category: str
    help_text: str
    command: click.Command | None = None

    def get_command(self) -> click.Command:
        if self.command is None:
            raise NotImplementedError(f"plugin {self.name!r} has no command")
        return self.command


class ScenarioConfigPath(click.ParamType):
    """A scenario config given as a path or a bare name under ``run.config_dir``."""

    name = "config"

    def convert(self, value: Any, param: click.Parameter | None, ctx: click.Context | None) -> Path:
        if isinstance(value, Path) and value.is_file():
            return value
        try:
            return resolve_scenario_path(value)
        except FileNotFoundError as e:
            self.fail(str(e), param, ctx)


SCENARIO_CONFIG = ScenarioConfigPath()
