"""Plugin discovery and registration.

Commands come from modules in this package and from the
``tracial_lab.plugins`` entry-point group.
"""

import importlib
import importlib.metadata
import logging
import pkgutil
from collections.abc import Iterator
from pathlib import Path

import click

from tracial_lab.plugins.base import CommandPlugin

logger = logging.getLogger(__name__)

_INFRASTRUCTURE = frozenset({"__init__", "base", "loader"})


class PluginLoader:
    """Discovers and loads command plugins.

    Attributes:
        plugins: Command name -> plugin instance
    """

    ENTRY_POINT_GROUP = "tracial_lab.plugins"

    def __init__(self) -> None:
        self.plugins: dict[str, CommandPlugin] = {}

    def discover_plugins(self) -> None:
        """Discover built-in and entry-point plugins."""
        self._discover_builtin_plugins()
        self._discover_entry_point_plugins()
        logger.debug("Discovered %d plugins", len(self.plugins))

    def _discover_builtin_plugins(self) -> None:
        plugins_dir = Path(__file__).parent
        for info in sorted(pkgutil.iter_modules([str(plugins_dir)]), key=lambda m: m.name):
            if info.name in _INFRASTRUCTURE:
                continue
            try:
                self._load_plugin_module(info.name)
            except Exception:
                logger.exception("Failed to load plugin module %s", info.name)

    def _load_plugin_module(self, stem: str) -> None:
        """Import ``tracial_lab.plugins.<stem>`` and register its ``plugin``."""
        module = importlib.import_module(f"tracial_lab.plugins.{stem}")
        plugin = getattr(module, "plugin", None)
        if plugin is None:
            logger.debug("No 'plugin' instance found in %s", stem)
        elif isinstance(plugin, CommandPlugin):
            self._register_plugin(plugin)
        else:
            logger.warning("Found 'plugin' in %s but not a CommandPlugin", stem)

    def _discover_entry_point_plugins(self) -> None:
        try:
            eps = importlib.metadata.entry_points(group=self.ENTRY_POINT_GROUP)
        except Exception:
            logger.exception("Failed to discover entry point plugins")
            return
        for ep in eps:
            try:
                self._register_plugin(ep.load()())
            except Exception:
                logger.exception("Failed to load plugin from entry point: %s", ep.name)

    def _register_plugin(self, plugin: CommandPlugin) -> None:
        if plugin.name in self.plugins:
            logger.warning("Plugin '%s' is already registered, skipping", plugin.name)
            return
        self.plugins[plugin.name] = plugin
        logger.debug("Registered plugin: %s (category: %s)", plugin.name, plugin.category)

    def register_commands(self, cli_group: click.Group) -> None:
        for plugin in self.plugins.values():
            try:
                cli_group.add_command(plugin.get_command(), name=plugin.name)
            except Exception:
                logger.exception("Failed to register command: %s", plugin.name)

    def get_plugins_by_category(self) -> dict[str, list[CommandPlugin]]:
        """Plugins grouped by category, sorted by name within each group."""
        categories: dict[str, list[CommandPlugin]] = {}
        for plugin in self.plugins.values():
            categories.setdefault(plugin.category, []).append(plugin)
        for plugins in categories.values():
            plugins.sort(key=lambda p: p.name)
        return categories

    def get_plugin(self, name: str) -> CommandPlugin | None:
        return self.plugins.get(name)

    def iter_plugins(self) -> Iterator[CommandPlugin]:
        yield from self.plugins.values()
