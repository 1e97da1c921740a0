"""Exception types shared across the package.

Every failure mode that callers are expected to branch on gets its own
class.  The CLI maps these onto process exit codes (config -> 2,
accuracy -> 3, admissibility/integrability -> 4).
"""

from __future__ import annotations


class LoctimeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LoctimeError, ValueError):
    """Invalid argument or configuration value."""


class SingularPointError(LoctimeError, ValueError):
    """An operator was evaluated exactly at a point where it diverges."""


class AccuracyError(LoctimeError):
    """A tolerance could not be met within the evaluation budget.

    Carries the best available estimate so callers can still inspect it.
    """

    def __init__(self, message: str, value: float | None = None,
                 error_estimate: float | None = None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class ConsistencyError(LoctimeError):
    """Two independent computation routes disagree beyond tolerance."""


class NonIntegrableError(LoctimeError, ValueError):
    """The requested singular integral diverges (exponent >= 1)."""


class AdmissibilityError(LoctimeError, ValueError):
    """The (H, d, N) combination is outside the admissible region.

    ``minimal_n`` is the smallest truncation level that would be valid.
    """

    def __init__(self, message: str, minimal_n: int | None = None):
        super().__init__(message)
        self.minimal_n = minimal_n
