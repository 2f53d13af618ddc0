"""Exception hierarchy. Each class carries the CLI exit code it maps to."""
from typing import List, Sequence


class CensorFitError(Exception):
    """Base class for all errors raised by censorfit."""
    exit_code: int = 1


# --- Usage / precondition errors (exit 2) ---
class UsageError(CensorFitError, ValueError):
    exit_code = 2


class PlanError(UsageError):
    """A censoring plan violates n >= m >= 1, R_j >= 0 or m + sum(R) = n."""


class ParameterDomainError(UsageError):
    """A distribution or model parameter lies outside its domain."""


# --- Data errors (exit 3) ---
class DataError(CensorFitError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    """A sample file does not follow the CSV schema."""

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class SampleValidationError(DataError):
    """A sample breaks one or more CompetingRisksSample invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        super().__init__("Sample violates invariants: " + "; ".join(self.violations))


class DegenerateSampleError(DataError):
    """The profile log-likelihood has no finite maximizer for this sample."""


# --- Numeric errors (exit 4) ---
class NumericError(CensorFitError, RuntimeError):
    exit_code = 4


class ConvergenceError(NumericError):
    def __init__(self, message: str, trace: Sequence[float] | None = None):
        super().__init__(message)
        self.trace: List[float] = list(trace or [])


class FixedPointDomainError(NumericError):
    """h(alpha) has a non-positive denominator at the current iterate."""


class SolverInconsistencyError(NumericError):
    """Nested fits disagree, e.g. a clearly negative likelihood-ratio statistic."""


class WeightDegeneracyError(NumericError):
    """Every importance log-weight is -inf."""


class ResolutionError(NumericError):
    """No admissible credible-interval pair exists for the requested level."""


class PropagationError(NumericError):
    """A functional returned a non-finite value on a draw with positive weight."""


class BootstrapFailureError(NumericError):
    """Too many bootstrap refits failed."""
