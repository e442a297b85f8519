"""Comprehensive tests for configuration system.

Tests cover:
- Model validation
- Environment variable loading
- YAML/JSON file loading
- Default values
- Error handling
"""

import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from tracial_lab.config import (
    LoggingConfig,
    NumericsConfig,
    RunConfig,
    Settings,
    get_settings,
    reload_settings,
    reset_settings,
)
from tracial_lab.config.manager import resolve_scenario_path, scenario_config_files
from tracial_lab.core.models import NumericDefaults


class TestNumericsConfig:
    """Test tolerance and budget configuration."""

    def test_default_values(self):
        config = NumericsConfig()

        assert config.tolerance == 1e-10
        assert config.strict_tolerance == 1e-12
        assert config.gap_tolerance == 1e-9
        assert config.fd_step == 1e-5
        assert config.max_sites == 12
        assert config.max_doubled_sites == 5

    def test_to_defaults(self):
        defaults = NumericsConfig(max_sites=8).to_defaults()
        assert isinstance(defaults, NumericDefaults)
        assert defaults.max_sites == 8
        assert defaults.tolerance == 1e-10

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tolerance": 0.0},
            {"tolerance": 0.5},
            {"fd_step": -1e-5},
            {"max_sites": 0},
            {"max_sites": 20},
            {"max_doubled_sites": 8},
        ],
    )
    def test_out_of_range(self, kwargs):
        with pytest.raises(ValidationError):
            NumericsConfig(**kwargs)

    def test_strict_tolerance_must_be_tighter(self):
        with pytest.raises(ValidationError, match="strict_tolerance"):
            NumericsConfig(tolerance=1e-11, strict_tolerance=1e-10)


class TestRunConfig:
    """Test scenario runner configuration."""

    def test_default_values(self):
        config = RunConfig()

        assert config.threads == 1
        assert config.output_dir == Path("runs")
        assert config.config_dir == Path("configs")
        assert config.show_progress is True
        assert config.artifact_version == "1"

    def test_output_dir_expansion(self):
        """Test that ~ is expanded in output directory."""
        config = RunConfig(output_dir="~/runs")

        assert "~" not in str(config.output_dir)
        assert config.output_dir.is_absolute()

    def test_thread_bounds(self):
        with pytest.raises(ValidationError):
            RunConfig(threads=0)
        with pytest.raises(ValidationError):
            RunConfig(threads=65)


class TestLoggingConfig:
    def test_level_is_normalized(self):
        assert LoggingConfig(level="debug").level == "DEBUG"

    def test_unknown_level(self):
        with pytest.raises(ValidationError, match="Unknown log level"):
            LoggingConfig(level="chatty")


class TestSettings:
    """Test main settings class."""

    def test_default_settings(self):
        settings = Settings()

        assert settings.numerics.tolerance == 1e-10
        assert settings.run.threads == 1
        assert settings.logging.level == "WARNING"
        assert settings.numeric_defaults() == NumericsConfig().to_defaults()

    def test_env_overrides(self, monkeypatch):
        """Nested values come from TLAB_SECTION__KEY."""
        monkeypatch.setenv("TLAB_RUN__THREADS", "4")
        monkeypatch.setenv("TLAB_NUMERICS__MAX_SITES", "8")
        monkeypatch.setenv("TLAB_LOGGING__LEVEL", "info")

        settings = Settings()

        assert settings.run.threads == 4
        assert settings.numerics.max_sites == 8
        assert settings.logging.level == "INFO"

    def test_invalid_env_value(self, monkeypatch):
        monkeypatch.setenv("TLAB_RUN__THREADS", "0")
        with pytest.raises(ValidationError):
            Settings()

    def test_dotenv_file(self, tmp_path):
        """The autouse fixture chdirs into tmp_path, where .env is read from."""
        (tmp_path / ".env").write_text("TLAB_RUN__THREADS=3\n", encoding="utf-8")
        assert Settings().run.threads == 3

    def test_from_yaml(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text(
            "numerics:\n  tolerance: 1.0e-9\nrun:\n  threads: 2\n  output_dir: out\n",
            encoding="utf-8",
        )

        settings = Settings.from_yaml(path)

        assert settings.numerics.tolerance == 1e-9
        assert settings.run.threads == 2
        assert settings.run.output_dir == Path("out")

    def test_from_empty_yaml(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("", encoding="utf-8")
        assert Settings.from_yaml(path).run.threads == 1

    def test_from_yaml_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            Settings.from_yaml(tmp_path / "nope.yaml")

    def test_from_yaml_invalid(self, tmp_path):
        path = tmp_path / "settings.yaml"
        path.write_text("run:\n  threads: many\n", encoding="utf-8")
        with pytest.raises(ValueError, match="Failed to load settings"):
            Settings.from_yaml(path)

    def test_from_json(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text(json.dumps({"numerics": {"max_doubled_sites": 3}}), encoding="utf-8")
        assert Settings.from_json(path).numerics.max_doubled_sites == 3

    def test_from_json_invalid(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValueError, match="Failed to load settings"):
            Settings.from_json(path)

    def test_to_yaml_round_trip(self, tmp_path):
        path = tmp_path / "saved.yaml"
        original = Settings(run={"threads": 5}, logging={"level": "error"})

        original.to_yaml(path)
        loaded = Settings.from_yaml(path)

        assert loaded.run.threads == 5
        assert loaded.logging.level == "ERROR"
        assert loaded.numerics == original.numerics


class TestSettingsManager:
    """Test the settings singleton."""

    def test_get_settings_is_cached(self):
        assert get_settings() is get_settings()

    def test_reset_settings(self):
        first = get_settings()
        reset_settings()
        assert get_settings() is not first

    def test_reload_from_yaml(self, tmp_path):
        path = tmp_path / "settings.yml"
        path.write_text("run:\n  threads: 6\n", encoding="utf-8")

        settings = reload_settings(path)

        assert settings.run.threads == 6
        assert get_settings() is settings

    def test_reload_from_json(self, tmp_path):
        path = tmp_path / "settings.json"
        path.write_text('{"logging": {"level": "DEBUG"}}', encoding="utf-8")
        assert reload_settings(path).logging.level == "DEBUG"

    def test_reload_without_file(self, monkeypatch):
        get_settings()
        monkeypatch.setenv("TLAB_RUN__THREADS", "2")
        assert reload_settings().run.threads == 2

    def test_reload_unsupported_format(self, tmp_path):
        path = tmp_path / "settings.toml"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError, match="Unsupported settings file format"):
            reload_settings(path)


class TestScenarioLookup:
    """Scenario references resolve to files directly or under run.config_dir."""

    @pytest.fixture()
    def settings(self, tmp_path):
        configs = tmp_path / "configs"
        configs.mkdir()
        (configs / "decay.conf").write_text("[scenario]\nname = spectrum\n", encoding="utf-8")
        (configs / "doubled.json").write_text('{"scenario": {"name": "doubled_algebra"}}', encoding="utf-8")
        (configs / "notes.txt").write_text("", encoding="utf-8")
        return Settings(run={"config_dir": configs})

    def test_existing_path_wins(self, tmp_path, settings):
        path = tmp_path / "local.conf"
        path.write_text("", encoding="utf-8")
        assert resolve_scenario_path(path, settings) == path

    @pytest.mark.parametrize(("ref", "expected"), [
        ("decay", "decay.conf"),
        ("decay.conf", "decay.conf"),
        ("doubled", "doubled.json"),
    ])
    def test_bare_name_found_in_config_dir(self, settings, ref, expected):
        assert resolve_scenario_path(ref, settings) == settings.run.config_dir / expected

    def test_suffix_added_in_working_directory(self, tmp_path, settings):
        """The autouse fixture makes tmp_path the working directory."""
        (tmp_path / "here.conf").write_text("", encoding="utf-8")
        assert resolve_scenario_path("here", settings) == Path("here.conf")

    def test_missing_reference(self, settings):
        with pytest.raises(FileNotFoundError, match="does not exist"):
            resolve_scenario_path("nope", settings)

    def test_config_dir_from_environment(self, tmp_path, monkeypatch, settings):
        monkeypatch.setenv("TLAB_RUN__CONFIG_DIR", str(settings.run.config_dir))
        assert resolve_scenario_path("decay") == settings.run.config_dir / "decay.conf"

    def test_config_files_listing(self, settings):
        names = [p.name for p in scenario_config_files(settings)]
        assert names == ["decay.conf", "doubled.json"]

    def test_config_files_without_directory(self, tmp_path):
        assert scenario_config_files(Settings(run={"config_dir": tmp_path / "absent"})) == []
