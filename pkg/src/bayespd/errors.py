"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage errors exit 1, validation errors
exit 2, numerical failures exit 3.
"""


class BayesPDError(Exception):
    """Base class for all package errors."""


class UsageError(BayesPDError):
    """Bad invocation: unknown preset, malformed option syntax, and the like."""


class ValidationError(BayesPDError, ValueError):
    """Rejected data or configuration (bad coordinates, malformed files, ...)."""


class NumericalError(BayesPDError, RuntimeError):
    """A numerical procedure could not complete to its contract."""


class QuadratureError(NumericalError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class SamplingError(NumericalError):
    """Rejection sampling stalled or a sampler produced an unusable result."""


class SimplexBudgetError(NumericalError):
    """A filtration would exceed the configured simplex budget."""


class DegenerateObservationError(NumericalError):
    """A posterior update denominator vanished for some observed point."""
