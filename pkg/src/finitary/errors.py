"""Exception hierarchy shared by the library and the CLI."""


class FinitaryError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(FinitaryError, ValueError):
    """An operation was called with inputs outside its contract.

    The CLI maps this class (and subclasses) to exit status 1.
    """


class DimensionMismatch(PreconditionError):
    pass


class InsufficientWindow(PreconditionError):
    """A code was asked to read sites outside the materialized configuration."""


class GuardExceeded(PreconditionError):
    """An exhaustive enumeration would exceed its configured budget."""


class InsufficientSupport(PreconditionError):
    """Too few nonzero survival points to fit a tail law."""
