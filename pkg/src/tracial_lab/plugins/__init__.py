"""Command plugins for the tlab CLI."""

from tracial_lab.plugins.base import SCENARIO_CONFIG, BaseCommandPlugin, CommandCategory, CommandPlugin
from tracial_lab.plugins.loader import PluginLoader

__all__ = [
    "SCENARIO_CONFIG",
    "BaseCommandPlugin",
    "CommandCategory",
    "CommandPlugin",
    "PluginLoader",
]
