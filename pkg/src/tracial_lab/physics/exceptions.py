"""Physics-specific exceptions.

Input problems derive from ValidationError (recoverable, exit code 1);
failed identities derive from NumericalError (exit code 2).
"""

from typing import Any

from tracial_lab.core.errors import NumericalError, ValidationError


class SiteIndexError(ValidationError):
    """Raised when a site index is outside 0..L-1."""

    def __init__(self, x: int, L: int) -> None:
        """Initialize SiteIndexError."""
        super().__init__(
            message=f"site index {x} out of range for L={L}",
            code="SITE_INDEX",
            context={"x": x, "L": L},
        )


class ShapeError(ValidationError):
    """Raised when vectors or matrices have the wrong shape."""

    def __init__(self, message: str, context: dict[str, Any] | None = None) -> None:
        """Initialize ShapeError."""
        super().__init__(message=message, code="SHAPE", context=context)


class PreconditionError(ValidationError):
    """Raised when an operation precondition fails (normalization, epsilon range, ...)."""

    def __init__(
        self,
        message: str,
        context: dict[str, Any] | None = None,
        suggestion: str | None = None,
    ) -> None:
        """Initialize PreconditionError."""
        super().__init__(
            message=message, code="PRECONDITION", context=context, suggestion=suggestion,
        )


class KernelConjugacyError(ValidationError):
    """Raised when a hopping kernel violates f(-d) = conj(f(d))."""

    def __init__(self, d: int, value: complex, partner: complex) -> None:
        """Initialize KernelConjugacyError."""
        super().__init__(
            message=(
                f"hopping kernel not self-adjoint: f({d})={value!r} but "
                f"f({-d})={partner!r}, expected its conjugate"
            ),
            code="KERNEL_CONJUGACY",
            context={"d": d},
            suggestion="Add the conjugate entry for -d or use HoppingKernel.from_pairs",
        )


class PositionSumError(ValidationError):
    """Raised when an interaction term does not conserve the position sum."""

    def __init__(self, term: str, created: int, annihilated: int, modulus: int | None) -> None:
        """Initialize PositionSumError."""
        where = f" mod {modulus}" if modulus else ""
        super().__init__(
            message=(
                f"interaction term {term} violates position-sum conservation: "
                f"{created} != {annihilated}{where}"
            ),
            code="POSITION_SUM",
            context={"term": term, "created": created, "annihilated": annihilated},
        )


class GaugeInvarianceError(ValidationError):
    """Raised when a term has unequal creator and annihilator counts."""

    def __init__(self, term: str) -> None:
        """Initialize GaugeInvarianceError."""
        super().__init__(
            message=f"term {term} has unequal creator/annihilator counts",
            code="GAUGE",
            context={"term": term},
        )


class ParityError(ValidationError):
    """Raised when an operator has the wrong parity grade for an operation."""

    def __init__(self, message: str) -> None:
        """Initialize ParityError."""
        super().__init__(message=message, code="PARITY")


class UnsupportedBoundaryError(ValidationError):
    """Raised for operations defined only on periodic lattices."""

    def __init__(self, operation: str) -> None:
        """Initialize UnsupportedBoundaryError."""
        super().__init__(
            message=f"{operation} requires a periodic lattice",
            code="BOUNDARY",
            suggestion="Set boundary = periodic",
        )


class QuantizationError(ValidationError):
    """Raised when a twist angle is not a multiple of 2*pi/L on a ring."""

    def __init__(self, g: float, L: int) -> None:
        """Initialize QuantizationError."""
        super().__init__(
            message=f"twist angle g={g!r} is not a multiple of 2*pi/{L}",
            code="TWIST_QUANTIZATION",
            context={"g": g, "L": L},
            suggestion="Use TwistAngle.from_index(k, L)",
        )


class NumericalDegeneracyError(NumericalError):
    """Raised when a spanning set or basis turns out rank deficient."""

    def __init__(self, message: str, context: dict[str, Any] | None = None) -> None:
        """Initialize NumericalDegeneracyError."""
        super().__init__(message=message, code="DEGENERACY", context=context)


class ConsistencyError(NumericalError):
    """Raised when a constructed object fails one of its defining identities."""

    def __init__(self, check: str, residual: float, tolerance: float) -> None:
        """Initialize ConsistencyError."""
        self.check = check
        self.residual = residual
        super().__init__(
            message=f"{check}: residual {residual:.3e} exceeds tolerance {tolerance:.1e}",
            code="CONSISTENCY",
            context={"check": check, "residual": residual, "tolerance": tolerance},
        )
