"""Tests for the scenario runner and its artifacts."""

import csv
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from tracial_lab.config import Settings
from tracial_lab.core.errors import LabError, ResourceLimitError
from tracial_lab.physics.exceptions import UnsupportedBoundaryError
from tracial_lab.workflow.runner import Table, _fmt, resolve_output_dir, run_scenario, write_table
from tracial_lab.workflow.scenario import parse_config
from tracial_lab.workflow.state import MANIFEST_NAME, RunManifest


def _read_csv(path: Path) -> list[list[str]]:
    with path.open(encoding="utf-8", newline="") as f:
        return list(csv.reader(f))


def _config(name: str, L: int = 4, boundary: str = "open", extra: str = "") -> str:
    return (
        f"[scenario]\nname = {name}\n[lattice]\nL = {L}\nboundary = {boundary}\n"
        "[kernel]\n1 = 1.0\n-1 = 1.0\n" + extra
    )


@pytest.mark.unit
class TestFormatting:
    """CSV cells are written in a fixed, round-trip form."""

    @pytest.mark.parametrize(
        ("value", "text"),
        [(True, "1"), (np.bool_(False), "0"), (3, "3"), (np.int64(7), "7"), (0.1, "0.1"), (np.float64(1e-17), "1e-17"), ("0 1", "0 1")],
    )
    def test_fmt(self, value, text):
        assert _fmt(value) == text

    def test_write_table(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, Table(("t", "value"), [(0.0, 1.5), (0.5, 2)]))
        assert path.read_text(encoding="utf-8") == "t,value\n0.0,1.5\n0.5,2\n"

    def test_write_failure_is_fatal_lab_error(self, tmp_path):
        with pytest.raises(LabError) as exc_info:
            write_table(tmp_path / "missing" / "t.csv", Table(("t",), []))
        assert exc_info.value.code == "ARTIFACT_WRITE_FAILED"
        assert exc_info.value.exit_code == 2


@pytest.mark.unit
class TestOutputDir:
    def test_precedence(self, tmp_path, quiet_settings, quasifree_config_text):
        config = parse_config(quasifree_config_text)
        assert resolve_output_dir(config, quiet_settings, None) == quiet_settings.run.output_dir / "quasifree_decay"
        assert resolve_output_dir(config, quiet_settings, tmp_path / "x") == tmp_path / "x"

        configured = parse_config(quasifree_config_text + f"[output]\ndir = {tmp_path / 'cfg'}\n")
        assert resolve_output_dir(configured, quiet_settings, None) == tmp_path / "cfg"
        assert resolve_output_dir(configured, quiet_settings, tmp_path / "x") == tmp_path / "x"


@pytest.mark.unit
class TestQuasifreeRun:
    """End-to-end quasifree_decay run into a temporary directory."""

    def test_artifacts_and_manifest(self, quasifree_config_text, quiet_settings, out_dir):
        manifest = run_scenario(parse_config(quasifree_config_text), quiet_settings, out_dir=out_dir)

        rows = _read_csv(out_dir / "curve_quasifree.csv")
        assert rows[0] == ["t", "value", "oracle"]
        assert len(rows) == 7
        assert float(rows[1][1]) == pytest.approx(0.0, abs=1e-12)
        assert manifest.summary["oracle_deviation"] < 1e-9
        assert [a.name for a in manifest.artifacts] == ["curve_quasifree.csv"]

        loaded = RunManifest.load(out_dir)
        assert loaded.scenario == "quasifree_decay"
        assert loaded.lattice == {"L": 4, "boundary": "open"}
        assert loaded.invalid_artifacts(out_dir) == []
        assert parse_config(loaded.config) == parse_config(quasifree_config_text)

    def test_thread_count_does_not_change_bytes(self, quasifree_config_text, quiet_settings, tmp_path):
        config = parse_config(quasifree_config_text)
        run_scenario(config, quiet_settings, out_dir=tmp_path / "one", threads=1)
        run_scenario(config, quiet_settings, out_dir=tmp_path / "four", threads=4)
        one = (tmp_path / "one" / "curve_quasifree.csv").read_bytes()
        four = (tmp_path / "four" / "curve_quasifree.csv").read_bytes()
        assert one == four

    def test_default_directory_from_settings(self, quasifree_config_text, quiet_settings):
        run_scenario(parse_config(quasifree_config_text), quiet_settings)
        assert (quiet_settings.run.output_dir / "quasifree_decay" / MANIFEST_NAME).exists()

    def test_budget_checked_before_anything_is_written(self, quasifree_config_text, out_dir):
        settings = Settings(numerics={"max_sites": 3}, run={"show_progress": False})
        with pytest.raises(ResourceLimitError):
            run_scenario(parse_config(quasifree_config_text), settings, out_dir=out_dir)
        assert not out_dir.exists()

    def test_partial_output_removed_on_failure(self, quasifree_config_text, quiet_settings, out_dir):
        with patch.object(RunManifest, "write", side_effect=OSError("disk full")), pytest.raises(OSError):
            run_scenario(parse_config(quasifree_config_text), quiet_settings, out_dir=out_dir)
        assert not out_dir.exists()

    def test_existing_directory_is_kept(self, quasifree_config_text, quiet_settings, out_dir):
        out_dir.mkdir()
        (out_dir / "notes.txt").write_text("keep me", encoding="utf-8")
        with patch.object(RunManifest, "write", side_effect=OSError("disk full")), pytest.raises(OSError):
            run_scenario(parse_config(quasifree_config_text), quiet_settings, out_dir=out_dir)
        assert sorted(p.name for p in out_dir.iterdir()) == ["notes.txt"]


@pytest.mark.unit
class TestScenarioHandlers:
    """One small run per scenario."""

    def test_interacting_decay(self, quiet_settings, out_dir):
        text = _config(
            "interacting_decay",
            extra="[interaction]\norbit = 0,1 | 1,0 | 1.0\n[time]\nt_end = 1.0\nsteps = 5\n",
        )
        manifest = run_scenario(parse_config(text), quiet_settings, out_dir=out_dir)
        assert _read_csv(out_dir / "curve_interacting.csv")[0] == ["t", "interacting", "quasifree"]
        assert {"min_interacting", "min_quasifree", "contrast_holds"} <= set(manifest.summary)
        assert manifest.t_max is not None

    def test_localization(self, quiet_settings, out_dir):
        text = _config("localization", extra="[time]\nt_end = 1.0\nsteps = 3\n")
        manifest = run_scenario(parse_config(text), quiet_settings, out_dir=out_dir)
        rows = _read_csv(out_dir / "curve_localization.csv")
        assert rows[0] == ["t", "radius", "exterior_commutator"]
        assert float(rows[1][1]) == 0.0
        assert manifest.summary["radius_min"] == 0.0

    def test_doubled_checks(self, quiet_settings, out_dir):
        text = _config("doubled_checks", L=2, extra="[interaction]\nterm = 0,1 | 1,0 | 1.0\n")
        manifest = run_scenario(parse_config(text), quiet_settings, out_dir=out_dir)
        assert manifest.summary["UP:P_idempotent"] < 1e-10
        assert manifest.summary["tracial_vs_trace"] < 1e-10
        assert len(_read_csv(out_dir / "report_dp_spectrum.csv")) == 17
        assert _read_csv(out_dir / "report_doubled.csv")[0] == ["quantity", "value"]

    def test_twist_covariance(self, quiet_settings, out_dir):
        text = _config("twist_covariance", boundary="periodic", extra="[interaction]\norbit = 0,1 | 1,0 | 1.0\n[time]\nt_end = 1.0\nsteps = 2\n")
        manifest = run_scenario(parse_config(text), quiet_settings, out_dir=out_dir)
        assert manifest.summary["max_violation"] < 1e-9
        rows = _read_csv(out_dir / "report_twist_locality.csv")
        assert rows[0] == ["k", "g", "distance"]
        assert len(rows) == 5

    def test_twist_covariance_needs_ring(self, quiet_settings, out_dir):
        with pytest.raises(UnsupportedBoundaryError):
            run_scenario(parse_config(_config("twist_covariance")), quiet_settings, out_dir=out_dir)
        assert not out_dir.exists()

    def test_eigenoperator_scan_default_windows(self, quiet_settings, out_dir):
        manifest = run_scenario(parse_config(_config("eigenoperator_scan", L=3)), quiet_settings, out_dir=out_dir)
        rows = _read_csv(out_dir / "report_eigenoperators.csv")
        assert [r[0] for r in rows[1:]] == ["0", "0 1", "0 1 2"]
        assert "full_window" in manifest.flags

    def test_multitime(self, quiet_settings, out_dir):
        text = _config("multitime", extra="[time]\nt_end = 1.0\nsteps = 3\n")
        manifest = run_scenario(parse_config(text), quiet_settings, out_dir=out_dir)
        assert manifest.summary["bound"] == pytest.approx(0.25)
        assert _read_csv(out_dir / "curve_multitime.csv")[0] == ["t", "defect", "product", "bound"]

    def test_spectrum(self, quiet_settings, out_dir):
        text = _config("spectrum", L=3, extra="[time]\nt_end = 2.0\nsteps = 5\n")
        manifest = run_scenario(parse_config(text), quiet_settings, out_dir=out_dir)
        assert manifest.summary["nonnegative"] == 1.0
        assert manifest.summary["total_weight"] == pytest.approx(1.0)
        assert manifest.summary["resample_deviation"] < 1e-8
        assert _read_csv(out_dir / "report_spectrum.csv")[0] == ["frequency", "weight_re", "weight_im"]
