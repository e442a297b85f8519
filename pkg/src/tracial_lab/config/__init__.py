"""Configuration management for tracial-lab.

Type-safe settings with pydantic-settings:
- Automatic .env file loading
- YAML/JSON settings files
- TLAB_-prefixed environment overrides

Usage:
    from tracial_lab.config import get_settings

    settings = get_settings()
    budget = settings.numerics.max_sites
"""

from tracial_lab.config.manager import get_settings, reload_settings, reset_settings
from tracial_lab.config.models import LoggingConfig, NumericsConfig, RunConfig, Settings

__all__ = [
    "LoggingConfig",
    "NumericsConfig",
    "RunConfig",
    "Settings",
    "get_settings",
    "reload_settings",
    "reset_settings",
]
