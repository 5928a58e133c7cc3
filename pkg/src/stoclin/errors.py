"""Exception hierarchy shared by all analysis modules."""


class StoclinError(Exception):
    """Base class for all library errors."""


class InvalidInputError(StoclinError):
    """Malformed or dimensionally inconsistent input data."""


class NumericalFailureError(StoclinError):
    """A numerical kernel (eigensolver, SDP, integrator) failed to converge."""


class InternalConsistencyError(StoclinError):
    """Two independent routes to the same answer disagreed; indicates a bug."""


class NotSupportedError(StoclinError):
    """Requested operation is outside the supported problem class."""
