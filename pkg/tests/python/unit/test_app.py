"""
Smoke tests for the main CLI application with plugin system.
"""
import logging

import click
import pytest
from click.testing import CliRunner

from tracial_lab import __version__
from tracial_lab.cli.app import cli, configure_logging, main
from tracial_lab.plugins import SCENARIO_CONFIG, BaseCommandPlugin, CommandCategory, CommandPlugin, PluginLoader


@pytest.mark.unit
class TestCLIApp:
    """Test main CLI application."""

    def test_cli_help(self):
        runner = CliRunner()
        result = runner.invoke(cli, ["--help"])
        assert result.exit_code == 0
        assert "CAR algebra laboratory" in result.output

    def test_cli_version(self):
        runner = CliRunner()
        result = runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output
        assert "tlab" in result.output

    @pytest.mark.parametrize("command", ["run", "check", "list-scenarios"])
    def test_command_registered(self, command):
        """Commands come from plugin modules."""
        result = CliRunner().invoke(cli, [command, "--help"])
        assert result.exit_code == 0
        assert "Usage" in result.output

    def test_cli_invalid_command(self):
        result = CliRunner().invoke(cli, ["invalid-command"])
        assert result.exit_code != 0
        assert "No such command" in result.output

    def test_bad_settings_file(self, tmp_path):
        path = tmp_path / "settings.toml"
        path.write_text("x = 1\n", encoding="utf-8")
        result = CliRunner().invoke(cli, ["--settings", str(path), "list-scenarios"])
        assert result.exit_code == 1
        assert "Settings Error" in result.output

    def test_settings_file_applies(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("logging:\n  level: ERROR\n", encoding="utf-8")
        result = CliRunner().invoke(cli, ["--settings", str(path), "list-scenarios"])
        assert result.exit_code == 0
        assert logging.getLogger("tracial_lab").level == logging.ERROR

    def test_verbose_flags(self):
        CliRunner().invoke(cli, ["-vv", "list-scenarios"])
        assert logging.getLogger("tracial_lab").level == logging.DEBUG
        CliRunner().invoke(cli, ["-v", "list-scenarios"])
        assert logging.getLogger("tracial_lab").level == logging.INFO

    def test_main_entry_point(self):
        assert callable(main)
        assert main.__name__ == "main"


@pytest.mark.unit
class TestConfigureLogging:
    def test_single_handler(self):
        configure_logging("WARNING")
        configure_logging("INFO")
        root = logging.getLogger("tracial_lab")
        assert len(root.handlers) == 1
        assert root.level == logging.INFO
        assert not root.propagate


@pytest.mark.unit
class TestPluginLoader:
    """Tests for plugin discovery."""

    def test_discovers_builtin_plugins(self):
        loader = PluginLoader()
        loader.discover_plugins()
        assert {"run", "check", "list-scenarios"} <= set(loader.plugins)
        assert all(isinstance(p, CommandPlugin) for p in loader.iter_plugins())

    def test_categories(self):
        loader = PluginLoader()
        loader.discover_plugins()
        categories = loader.get_plugins_by_category()
        assert [p.name for p in categories["Scenarios"]] == ["list-scenarios", "run"]
        assert [p.name for p in categories["Verification"]] == ["check"]

    def test_get_plugin(self):
        loader = PluginLoader()
        loader.discover_plugins()
        assert loader.get_plugin("check").help_text.startswith("Run invariant suites")
        assert loader.get_plugin("nope") is None

    def test_builtin_categories_are_enumerated(self):
        loader = PluginLoader()
        loader.discover_plugins()
        assert {p.category for p in loader.iter_plugins()} <= set(CommandCategory)

    def test_plugin_without_command(self):
        with pytest.raises(NotImplementedError):
            BaseCommandPlugin("bare", CommandCategory.SCENARIOS, "no command").get_command()

    def test_scenario_config_parameter(self, tmp_path):
        @click.command()
        @click.argument("config", type=SCENARIO_CONFIG)
        def show(config):
            click.echo(config.name)

        (tmp_path / "configs").mkdir()
        (tmp_path / "configs" / "ring.conf").write_text("", encoding="utf-8")
        runner = CliRunner()
        assert runner.invoke(show, ["ring"]).output == "ring.conf\n"
        missing = runner.invoke(show, ["absent"])
        assert missing.exit_code == 2
        assert "does not exist" in missing.output

    def test_duplicate_registration_is_skipped(self):
        class Dummy(BaseCommandPlugin):
            def get_command(self):
                return click.Command("dummy")

        loader = PluginLoader()
        first = Dummy("dummy", "Misc", "first")
        loader._register_plugin(first)
        loader._register_plugin(Dummy("dummy", "Misc", "second"))
        assert loader.get_plugin("dummy") is first

    def test_register_commands(self):
        class Dummy(BaseCommandPlugin):
            def get_command(self):
                return click.Command("dummy", callback=lambda: click.echo("hi"))

        loader = PluginLoader()
        loader._register_plugin(Dummy("dummy", "Misc", "say hi"))
        group = click.Group("g")
        loader.register_commands(group)
        result = CliRunner().invoke(group, ["dummy"])
        assert result.output == "hi\n"
