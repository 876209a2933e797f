"""Exception hierarchy shared by all pmgp modules."""


class PMGPError(Exception):
    """Base class for every error raised by pmgp."""


class InputError(PMGPError, ValueError):
    """Invalid user-supplied input (non-finite values, bad files, bad config)."""


class DomainError(InputError):
    """Argument outside the mathematical domain of a function."""


class DimensionError(InputError):
    """Array or vector of the wrong length/shape."""


class OrderingError(InputError):
    """Times are not strictly increasing."""


class UnsupportedOrderError(PMGPError, ValueError):
    """Derivative order exceeds what the kernel supports (2p)."""


class ConditioningError(PMGPError, ArithmeticError):
    """A matrix stayed singular or indefinite after jitter escalation."""


class DegenerateSeriesError(InputError):
    """Series whose increments have zero spread, so NMAE is undefined."""
