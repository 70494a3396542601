"""
Error types for the TAR(1) toolkit.

Configuration problems, numeric guards and undefined estimators each get their
own exception so that the CLI can map them to exit codes and the Monte Carlo
harness can count them instead of aborting.
"""

from typing import Optional


class TarLimitsError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(TarLimitsError, ValueError):
    """A configuration file or value could not be parsed or validated."""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class DomainError(TarLimitsError, ValueError):
    """An argument lies outside the domain of the operation."""


class NumericGuardError(TarLimitsError, ArithmeticError):
    """A numeric guard tripped; the computation cannot be trusted."""


class OverflowGuard(NumericGuardError):
    """|Y_t| exceeded the overflow ceiling while simulating a path."""

    def __init__(self, index: int, value: float, limit: float):
        self.index = index
        self.value = value
        self.limit = limit
        super().__init__(
            f"|Y_t| exceeded {limit:.0e} at t={index} (value {value:.3e}); reduce n"
        )

    def __reduce__(self):
        return (type(self), (self.index, self.value, self.limit))


class DivisionGuard(NumericGuardError):
    """A denominator is too close to zero to divide by."""


class DegenerateIntegral(NumericGuardError):
    """The Riemann sum of B^2 is exactly zero (degenerate increment law)."""


class RegimeEmpty(TarLimitsError):
    """An estimator is undefined because its regime has a zero denominator."""

    def __init__(self, side: str):
        self.side = side
        super().__init__(f"{side} regime is empty; the estimator is undefined")

    def __reduce__(self):
        return (type(self), (self.side,))


class DegenerateProblem(TarLimitsError):
    """The constrained least-squares problem has no usable data."""


class ConstructionMismatch(TarLimitsError, ValueError):
    """The requested xi construction does not apply to the given beta."""


class TailGuardFailed(TarLimitsError):
    """Lower-regime visits were seen in the final half of the xi horizon."""


class EmptyDistribution(TarLimitsError, ValueError):
    """An operation needs at least one sample."""


class AllReplicationsDegenerate(TarLimitsError):
    """Every replication was dropped for some path length."""

    def __init__(self, n: int, n_dropped: int):
        self.n = n
        self.n_dropped = n_dropped
        super().__init__(f"all {n_dropped} replications were dropped at n={n}")

    def __reduce__(self):
        return (type(self), (self.n, self.n_dropped))
