"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and NumericalError (and its
subclasses) to exit code 3; everything else is a plain bug.
"""


class HeadfxError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(HeadfxError, ValueError):
    """A vector argument has the wrong length; the message names it."""


class DomainError(HeadfxError, ValueError):
    """A parameter or input violates its documented domain."""


class NonFiniteError(HeadfxError, ValueError):
    """An input contains NaN or infinity where finite values are required."""


class NumericalError(HeadfxError, RuntimeError):
    """A numerical procedure failed (divergence, bad bracket, ...)."""


class DivergenceError(NumericalError):
    """State blew up or left its admissible box during integration."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class BracketError(NumericalError):
    """A bisection bracket does not straddle the classification threshold."""


class ConfigError(HeadfxError, ValueError):
    """A scenario/sweep config file is malformed; the message names the key."""
