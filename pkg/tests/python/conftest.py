"""
Pytest configuration and shared fixtures.

This file is automatically loaded by pytest and provides fixtures
available to all tests.
"""
import json
from collections.abc import Sequence
from functools import cached_property
from pathlib import Path

import numpy as np
import pytest

from tracial_lab.config import Settings, reset_settings
from tracial_lab.physics.car import Boundary, LatticeSpec

PINS_FILE = Path(__file__).parent / "pins.json"

# ============================================================================
# LATTICE FIXTURES
# ============================================================================

@pytest.fixture()
def open3() -> LatticeSpec:
    """Three-site open chain (8-dimensional Fock space)."""
    return LatticeSpec(3, Boundary.OPEN)


@pytest.fixture()
def open4() -> LatticeSpec:
    return LatticeSpec(4, Boundary.OPEN)


@pytest.fixture()
def ring4() -> LatticeSpec:
    """Four-site ring."""
    return LatticeSpec(4, Boundary.PERIODIC)


@pytest.fixture()
def rng() -> np.random.Generator:
    """Seeded generator; every test gets the same stream."""
    return np.random.default_rng(1234)


# ============================================================================
# SETTINGS AND OUTPUT FIXTURES
# ============================================================================

@pytest.fixture(autouse=True)
def _isolated_settings(monkeypatch: pytest.MonkeyPatch, tmp_path: Path):
    """Keep TLAB_ variables and the settings singleton from leaking between tests."""
    import os

    for key in list(os.environ):
        if key.startswith("TLAB_"):
            monkeypatch.delenv(key, raising=False)
    monkeypatch.chdir(tmp_path)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture()
def quiet_settings(tmp_path: Path) -> Settings:
    """Settings with progress output off and runs under tmp_path."""
    return Settings(run={"show_progress": False, "output_dir": tmp_path / "runs"})


@pytest.fixture()
def out_dir(tmp_path: Path) -> Path:
    return tmp_path / "out"


# ============================================================================
# REGRESSION PINS
# ============================================================================

class Pins:
    """Values pinned in tests/python/pins.json, which tests only ever read.

    A missing name fails with the measured value so it can be reviewed and
    committed by hand. Scalars and curves compare at ``rel`` relative and
    ``abs_tol`` absolute tolerance.
    """

    def __init__(self, path: Path) -> None:
        self.path = path

    @cached_property
    def values(self) -> dict[str, float | list[float]]:
        return json.loads(self.path.read_text(encoding="utf-8"))

    def check(
        self, name: str, value: float | Sequence[float], rel: float = 1e-8, abs_tol: float = 1e-12,
    ) -> None:
        if name not in self.values:
            measured = np.asarray(value, dtype=float).tolist()
            pytest.fail(f"no pin named {name!r} in {self.path.name}; measured {measured!r}")
        np.testing.assert_allclose(
            np.asarray(value, dtype=float),
            np.asarray(self.values[name], dtype=float),
            rtol=rel,
            atol=abs_tol,
            err_msg=f"pin {name}",
        )


@pytest.fixture(scope="session")
def pins() -> Pins:
    return Pins(PINS_FILE)


# ============================================================================
# CONFIG TEXT FIXTURES
# ============================================================================

QUASIFREE_CONFIG = """\
# hopping chain, two distant bilinears
[scenario]
name = quasifree_decay

[lattice]
L = 4
boundary = open

[kernel]
1 = 1.0
-1 = 1.0

[operators]
A = bilinear 0,1
B = bilinear 2,3

[time]
t_end = 1.0
steps = 6
"""


@pytest.fixture()
def quasifree_config_text() -> str:
    return QUASIFREE_CONFIG


@pytest.fixture()
def write_config(tmp_path: Path):
    """Write config text to a file and return its path."""
    def _write(text: str, name: str = "scenario.conf") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write
