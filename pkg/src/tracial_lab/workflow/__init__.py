"""Scenario configs, the runner, check suites and run manifests."""

from .checks import CheckLevel, CheckReport, CheckResult, run_checks
from .parallel import ParallelExecutor
from .runner import run_scenario
from .scenario import SCENARIO_DESCRIPTIONS, ScenarioConfig, ScenarioName, load_config, parse_config
from .state import RunArtifact, RunManifest

__all__ = [
    "SCENARIO_DESCRIPTIONS",
    "CheckLevel",
    "CheckReport",
    "CheckResult",
    "ParallelExecutor",
    "RunArtifact",
    "RunManifest",
    "ScenarioConfig",
    "ScenarioName",
    "load_config",
    "parse_config",
    "run_checks",
    "run_scenario",
]
