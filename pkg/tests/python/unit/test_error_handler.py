"""Tests for error handler module."""

import pytest

from tracial_lab.core import error_handler
from tracial_lab.core.errors import (
    ConfigParseError,
    ConfigurationError,
    LabError,
    NumericalError,
    ResourceLimitError,
)
from tracial_lab.physics.exceptions import (
    ConsistencyError,
    PositionSumError,
    UnsupportedBoundaryError,
)


@pytest.mark.unit
class TestErrorHandlers:
    """Test suite for error handler functions."""

    def test_handle_parse_error(self, capsys):
        """Parse errors show the offending line and exit 1."""
        error = ConfigParseError("unknown section [bogus]", line=3)

        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_parse_error(error)

        assert exc_info.value.code == 1
        captured = capsys.readouterr()
        assert "Config Parse Error" in captured.err
        assert "line 3: unknown section [bogus]" in captured.err
        assert "list-scenarios" in captured.err

    def test_handle_resource_error(self, capsys):
        error = ResourceLimitError("L=20 exceeds max_sites=12")

        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_resource_error(error)

        assert exc_info.value.code == 1
        captured = capsys.readouterr()
        assert "Resource Limit Exceeded" in captured.err
        assert "TLAB_NUMERICS__MAX_SITES" in captured.err

    def test_handle_numerical_error(self, capsys):
        """Failed identities exit 2 and print their context."""
        error = ConsistencyError("J^2 = 1", 1e-3, 1e-10)

        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_numerical_error(error)

        assert exc_info.value.code == 2
        captured = capsys.readouterr()
        assert "Numerical Check Failed" in captured.err
        assert "check: J^2 = 1" in captured.err

    def test_handle_validation_error(self, capsys):
        error = UnsupportedBoundaryError("twist_covariance")

        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_validation_error(error)

        assert exc_info.value.code == 1
        captured = capsys.readouterr()
        assert "Invalid Input" in captured.err
        assert "requires a periodic lattice" in captured.err
        assert "boundary = periodic" in captured.err

    def test_handle_general_error(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_general_error(RuntimeError("unexpected"))

        assert exc_info.value.code == 1
        captured = capsys.readouterr()
        assert "Unexpected Error" in captured.err
        assert "--verbose" in captured.err

    def test_general_lab_error_keeps_exit_code(self):
        error = LabError("write failed", "ARTIFACT_WRITE_FAILED", recoverable=False)
        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_general_error(error)
        assert exc_info.value.code == 2


@pytest.mark.unit
class TestHandleCliError:
    """Test the central dispatch."""

    @pytest.mark.parametrize(
        ("error", "heading", "code"),
        [
            (ConfigParseError("bad", line=1), "Config Parse Error", 1),
            (ResourceLimitError("too big"), "Resource Limit Exceeded", 1),
            (NumericalError("diverged"), "Numerical Check Failed", 2),
            (PositionSumError("t", 1, 3, None), "Invalid Input", 1),
            (ConfigurationError("bad settings"), "Invalid Input", 1),
            (ValueError("oops"), "Unexpected Error", 1),
        ],
    )
    def test_dispatch(self, capsys, error, heading, code):
        with pytest.raises(SystemExit) as exc_info:
            error_handler.handle_cli_error(error)

        assert exc_info.value.code == code
        assert heading in capsys.readouterr().err
