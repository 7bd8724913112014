"""Exception types shared across the package."""


class GroverNoiseError(Exception):
    """Base class for all package errors."""


class ValidationError(GroverNoiseError, ValueError):
    """Invalid argument, malformed matrix, or inconsistent circuit."""


class CapacityError(GroverNoiseError):
    """Requested size exceeds what a backend or oracle supports."""


class UnbracketedError(GroverNoiseError):
    """A threshold sweep found no crossing of the target selectivity."""

    def __init__(self, message: str, edge: str):
        super().__init__(message)
        self.edge = edge


class FitError(GroverNoiseError):
    """Least-squares fit could not be performed."""
