"""
Core error handling for tracial-lab.

Following EAFP (Easier to Ask Forgiveness than Permission) principles:
- Try operations, catch errors gracefully
- Provide structured, JSON-serializable errors for manifests and logs
- Include helpful suggestions for users

All errors inherit from LabError and provide:
- Structured attributes (message, code, recoverable, context)
- JSON serialization (to_dict, to_json)
- Appropriate exit codes
- Automatic timestamps
"""
import functools
import json
import logging
from collections.abc import Callable
from datetime import UTC, datetime
from typing import Any

logger = logging.getLogger(__name__)


# ============================================================================
# BASE ERROR CLASS
# ============================================================================

class LabError(Exception):
    """
    Base error class for all tracial-lab errors.

    Attributes:
        message: Human-readable error message
        code: Machine-readable error code (e.g., "VALIDATION_POSITION_SUM")
        recoverable: Whether the user can fix this error (bad input vs. bad math)
        context: Additional structured context (dict)
        suggestion: Optional helpful suggestion for fixing the error
    """

    def __init__(
        self,
        message: str,
        code: str,
        recoverable: bool = True,
        context: dict[str, Any] | None = None,
        suggestion: str | None = None,
    ):
        """Initialize LabError."""
        super().__init__(message)
        self.message = message
        self.code = code
        self.recoverable = recoverable
        self.context = context or {}
        self.suggestion = suggestion
        self.timestamp = datetime.now(UTC).isoformat()

    def to_dict(self) -> dict[str, Any]:
        """
        Convert error to JSON-serializable dict.

        Returns:
            Dict with error details for logging or the run manifest
        """
        result = {
            "message": self.message,
            "code": self.code,
            "recoverable": self.recoverable,
            "context": self.context,
            "timestamp": self.timestamp,
        }

        if self.suggestion:
            result["suggestion"] = self.suggestion

        return result

    def to_json(self) -> str:
        """Convert error to JSON string."""
        return json.dumps(self.to_dict(), indent=2, default=str)

    @property
    def exit_code(self) -> int:
        """
        Get appropriate exit code.

        Returns:
            1 for recoverable errors (user can fix)
            2 for fatal errors (numerical or system issue)
        """
        return 1 if self.recoverable else 2

    def __str__(self) -> str:
        """Formatted error message with code."""
        result = f"[{self.code}] {self.message}"

        if self.suggestion:
            result += f"\n\nSuggestion: {self.suggestion}"

        return result


class _PrefixedError(LabError):
    """LabError whose codes always carry a category prefix."""

    prefix: str = "LAB_"
    default_code: str = "LAB_ERROR"

    def __init__(
        self,
        message: str,
        code: str | None = None,
        recoverable: bool = True,
        context: dict[str, Any] | None = None,
        suggestion: str | None = None,
    ):
        if code is None:
            code = self.default_code
        elif not code.startswith(self.prefix):
            code = f"{self.prefix}{code}"

        super().__init__(
            message=message,
            code=code,
            recoverable=recoverable,
            context=context,
            suggestion=suggestion,
        )


# ============================================================================
# CONFIGURATION ERRORS
# ============================================================================

class ConfigurationError(_PrefixedError):
    """Base class for settings and scenario-configuration errors."""

    prefix = "CONFIG_"
    default_code = "CONFIG_ERROR"


class ConfigParseError(ConfigurationError):
    """Raised when a scenario config cannot be parsed; names the offending line."""

    def __init__(
        self,
        message: str,
        line: int | None = None,
        context: dict[str, Any] | None = None,
        suggestion: str | None = None,
    ):
        """Initialize ConfigParseError."""
        self.line = line
        ctx = dict(context or {})
        if line is not None:
            ctx["line"] = line
            message = f"line {line}: {message}"

        super().__init__(
            message=message,
            code="PARSE",
            recoverable=True,
            context=ctx,
            suggestion=suggestion,
        )


# ============================================================================
# VALIDATION / RESOURCE / NUMERICAL ERRORS
# ============================================================================

class ValidationError(_PrefixedError):
    """Base class for rejected inputs (bad indices, shapes, kernels, terms)."""

    prefix = "VALIDATION_"
    default_code = "VALIDATION_ERROR"


class ResourceLimitError(_PrefixedError):
    """Raised when a requested Fock space exceeds the configured budget."""

    prefix = "RESOURCE_"
    default_code = "RESOURCE_LIMIT"

    def __init__(
        self,
        message: str,
        code: str | None = None,
        context: dict[str, Any] | None = None,
        suggestion: str | None = None,
    ):
        """Initialize ResourceLimitError."""
        super().__init__(
            message=message,
            code=code,
            recoverable=True,
            context=context,
            suggestion=suggestion or "Reduce L or raise the numerics budget in settings",
        )


class NumericalError(_PrefixedError):
    """Raised when a computed identity or decomposition fails beyond tolerance."""

    prefix = "NUMERIC_"
    default_code = "NUMERIC_ERROR"

    def __init__(
        self,
        message: str,
        code: str | None = None,
        context: dict[str, Any] | None = None,
        suggestion: str | None = None,
    ):
        """Initialize NumericalError."""
        super().__init__(
            message=message,
            code=code,
            recoverable=False,
            context=context,
            suggestion=suggestion,
        )


# ============================================================================
# EAFP HELPERS
# ============================================================================

def handle_error(
    error_code: str,
    message: str | None = None,
    recoverable: bool = True,
) -> Callable[[Callable[..., Any]], Callable[..., Any]]:
    """
    Decorator to catch exceptions and convert to LabError.

    Usage:
        @handle_error(error_code="SCENARIO_FAILED")
        def risky_operation():
            raise ValueError("Something went wrong")

    Args:
        error_code: Error code for the LabError
        message: Optional custom message (uses original if not provided)
        recoverable: Whether error is recoverable

    Returns:
        Decorated function that raises LabError instead of original exception
    """
    def decorator(func: Callable[..., Any]) -> Callable[..., Any]:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            try:
                return func(*args, **kwargs)
            except LabError:
                raise
            except Exception as e:
                error_message = message or str(e)
                logger.debug("Wrapping %s in LabError(%s)", type(e).__name__, error_code)
                raise LabError(
                    message=error_message,
                    code=error_code,
                    recoverable=recoverable,
                    context={"original": str(e), "type": type(e).__name__},
                ) from e
        return wrapper
    return decorator
