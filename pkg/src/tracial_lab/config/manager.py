"""Settings singleton and scenario config lookup.

``tlab run quasifree`` resolves to ``<run.config_dir>/quasifree.conf`` (or
``.json``) when no file of that name exists relative to the working directory.
"""

import logging
from collections.abc import Callable
from pathlib import Path

from tracial_lab.config.models import Settings

logger = logging.getLogger(__name__)

SCENARIO_SUFFIXES = (".conf", ".json")

_LOADERS: dict[str, Callable[[Path], Settings]] = {
    ".yaml": Settings.from_yaml,
    ".yml": Settings.from_yaml,
    ".json": Settings.from_json,
}

_settings: Settings | None = None


def get_settings() -> Settings:
    """Process-wide settings, built from .env and TLAB_ variables on first use."""
    global _settings  # noqa: PLW0603

    if _settings is None:
        _settings = Settings()
    return _settings


def reload_settings(config_file: Path | None = None) -> Settings:
    """Replace the singleton, from a .yaml/.yml/.json settings file when given."""
    global _settings  # noqa: PLW0603

    if config_file is None:
        _settings = Settings()
        return _settings
    loader = _LOADERS.get(config_file.suffix)
    if loader is None:
        raise ValueError(
            f"Unsupported settings file format: {config_file.suffix}. Use .yaml, .yml, or .json",
        )
    _settings = loader(config_file)
    return _settings


def reset_settings() -> None:
    """Drop the singleton (tests)."""
    global _settings  # noqa: PLW0603
    _settings = None


def _candidates(ref: Path, config_dir: Path) -> list[Path]:
    out = [ref]
    if ref.suffix not in SCENARIO_SUFFIXES:
        out += [ref.with_name(ref.name + suffix) for suffix in SCENARIO_SUFFIXES]
    if not ref.is_absolute():
        out += [config_dir / path for path in list(out)]
    return out


def resolve_scenario_path(ref: str | Path, settings: Settings | None = None) -> Path:
    """Path of a scenario config given as a file path or a bare name.

    Tried in order: ``ref`` itself, ``ref`` with each scenario suffix, then the
    same names under ``run.config_dir``.

    Raises:
        FileNotFoundError: no candidate is an existing file
    """
    config_dir = (settings or get_settings()).run.config_dir
    candidates = _candidates(Path(ref), config_dir)
    for path in candidates:
        if path.is_file():
            logger.debug("scenario %s resolved to %s", ref, path)
            return path
    raise FileNotFoundError(
        f"scenario config {str(ref)!r} does not exist (looked in . and {config_dir})",
    )


def scenario_config_files(settings: Settings | None = None) -> list[Path]:
    """Scenario configs under ``run.config_dir``, sorted by name."""
    config_dir = (settings or get_settings()).run.config_dir
    if not config_dir.is_dir():
        return []
    return sorted(p for p in config_dir.iterdir() if p.is_file() and p.suffix in SCENARIO_SUFFIXES)
