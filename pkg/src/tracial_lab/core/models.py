"""Numerical defaults shared by every physics module.

Settings can override these per run; library functions fall back to them
when no tolerance is passed.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericDefaults:
    """Default tolerances and budgets.

    Attributes:
        tolerance: relative tolerance for algebraic identity checks
        strict_tolerance: tolerance for identities exact up to rounding (CAR, parity)
        gap_tolerance: eigenvalues closer than this share a degeneracy group
        fd_step: central finite-difference step for derivative cross-checks
        max_sites: largest L for dense 2^L matrices
        max_doubled_sites: largest L for the 4^L doubled space
    """

    tolerance: float = 1e-10
    strict_tolerance: float = 1e-12
    gap_tolerance: float = 1e-9
    fd_step: float = 1e-5
    max_sites: int = 12
    max_doubled_sites: int = 5


DEFAULTS = NumericDefaults()


__all__ = ["DEFAULTS", "NumericDefaults"]
