"""Exception hierarchy shared by all covstat modules."""


class CovStatError(Exception):
    """Base class for errors raised by covstat."""


class InputError(CovStatError, ValueError):
    """Invalid data or argument values supplied by the caller."""


class DomainError(InputError):
    """A basis function was evaluated outside [0, 1)."""


class DegenerateSeriesError(CovStatError, ValueError):
    """A variance estimate needed as a scale is (numerically) zero."""


class ConfigurationError(CovStatError, ValueError):
    """Inconsistent grid, basis, bootstrap or experiment settings."""
