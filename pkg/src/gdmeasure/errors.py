"""Exception types shared across the package."""


class GdmError(Exception):
    """Base class for all package errors."""


class ConfigError(GdmError, ValueError):
    """Bad user input: malformed config, out-of-range parameter, non-probability vector."""


class StateSpaceError(GdmError, ValueError):
    """A state fell outside the declared state space of a system."""


class ValidationError(GdmError, ValueError):
    """A structural condition on a matrix family failed.

    Carries the name of the failed condition and the offending branch index.
    """

    def __init__(self, condition: str, index: int | None, message: str):
        super().__init__(message)
        self.condition = condition
        self.index = index


class BudgetError(GdmError, RuntimeError):
    """A computation exceeded its declared budget (tree size, iterations, bit length)."""
