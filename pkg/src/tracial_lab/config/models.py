"""Configuration models for tracial-lab."""

import json
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from tracial_lab.core.models import NumericDefaults


class NumericsConfig(BaseModel):
    """Tolerances and Fock-space budgets.

    Attributes:
        tolerance: relative tolerance for algebraic identity checks
        strict_tolerance: tolerance for identities exact up to rounding
        gap_tolerance: eigenvalue clustering tolerance for degeneracy groups
        fd_step: central finite-difference step
        max_sites: largest L for dense 2^L matrices
        max_doubled_sites: largest physical L for the 4^L doubled space
    """

    tolerance: float = Field(default=1e-10, gt=0, lt=1e-2, description="Identity-check tolerance")
    strict_tolerance: float = Field(default=1e-12, gt=0, lt=1e-6, description="Rounding-level tolerance")
    gap_tolerance: float = Field(default=1e-9, gt=0, lt=1e-2, description="Degeneracy clustering gap")
    fd_step: float = Field(default=1e-5, gt=0, lt=1e-1, description="Finite-difference step")
    max_sites: int = Field(default=12, ge=1, le=14, description="Largest L for 2^L matrices")
    max_doubled_sites: int = Field(default=5, ge=1, le=7, description="Largest L for 4^L matrices")

    @model_validator(mode="after")
    def check_ordering(self) -> "NumericsConfig":
        """The strict tolerance may not be looser than the regular one."""
        if self.strict_tolerance > self.tolerance:
            raise ValueError("strict_tolerance must not exceed tolerance")
        return self

    def to_defaults(self) -> NumericDefaults:
        """Freeze into the dataclass the physics modules consume."""
        return NumericDefaults(**self.model_dump())


class RunConfig(BaseModel):
    """Scenario runner configuration.

    Attributes:
        threads: worker threads for time grids and check suites
        output_dir: default directory for CSV and manifest artifacts
        config_dir: where bare scenario names given to `tlab run` are looked up
        show_progress: render rich progress bars on stderr
        artifact_version: version stamp written into every manifest
    """

    threads: int = Field(default=1, ge=1, le=64, description="Worker threads")
    output_dir: Path = Field(default=Path("runs"), description="Artifact directory")
    config_dir: Path = Field(default=Path("configs"), description="Scenario config directory")
    show_progress: bool = Field(default=True, description="Show progress bars")
    artifact_version: str = Field(default="1", min_length=1, description="Manifest artifact version")

    @field_validator("output_dir", "config_dir", mode="before")
    @classmethod
    def expand_output_dir(cls, v: Any) -> Path:
        """Expand ~ in the output and config directories."""
        return Path(v).expanduser()


class LoggingConfig(BaseModel):
    """Logging configuration."""

    level: str = Field(default="WARNING", description="Root log level")
    rich_tracebacks: bool = Field(default=True, description="Pretty tracebacks via rich")

    @field_validator("level")
    @classmethod
    def validate_level(cls, v: str) -> str:
        """Accept standard logging level names, case-insensitively."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level


class Settings(BaseSettings):
    """Main application settings.

    Settings are loaded from:
    1. .env file (automatically discovered)
    2. Environment variables (take precedence over .env)
    3. settings.yaml or settings.json (when passed via --settings)

    Environment variables use the TLAB_ prefix and double underscore for nesting:
        TLAB_NUMERICS__TOLERANCE=1e-9   -> settings.numerics.tolerance
        TLAB_RUN__THREADS=4             -> settings.run.threads
        TLAB_LOGGING__LEVEL=debug       -> settings.logging.level
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
        env_prefix="TLAB_",
    )

    numerics: NumericsConfig = NumericsConfig()
    run: RunConfig = RunConfig()
    logging: LoggingConfig = LoggingConfig()

    @classmethod
    def from_yaml(cls, config_file: Path) -> "Settings":
        """Load settings from a YAML file.

        Raises:
            FileNotFoundError: If config file doesn't exist
            ValueError: If YAML is invalid
        """
        if not config_file.exists():
            raise FileNotFoundError(f"Settings file not found: {config_file}")

        try:
            with config_file.open() as f:
                config_data = yaml.safe_load(f) or {}
            return cls(**config_data)
        except Exception as e:
            raise ValueError(f"Failed to load settings from {config_file}: {e}") from e

    @classmethod
    def from_json(cls, config_file: Path) -> "Settings":
        """Load settings from a JSON file.

        Raises:
            FileNotFoundError: If config file doesn't exist
            ValueError: If JSON is invalid
        """
        if not config_file.exists():
            raise FileNotFoundError(f"Settings file not found: {config_file}")

        try:
            with config_file.open() as f:
                config_data = json.load(f)
            return cls(**config_data)
        except Exception as e:
            raise ValueError(f"Failed to load settings from {config_file}: {e}") from e

    def to_yaml(self, output_file: Path) -> None:
        """Save settings to a YAML file."""
        config_dict = self.model_dump(mode="json")
        with output_file.open("w") as f:
            yaml.safe_dump(config_dict, f, default_flow_style=False, sort_keys=False)

    def numeric_defaults(self) -> NumericDefaults:
        """Numerics section as a frozen NumericDefaults."""
        return self.numerics.to_defaults()


__all__ = ["LoggingConfig", "NumericsConfig", "RunConfig", "Settings"]
