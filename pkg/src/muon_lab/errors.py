"""Exception types shared across the package."""


class MuonLabError(Exception):
    """Base class for package-specific failures."""


class DecompositionError(MuonLabError):
    """Raised when a matrix decomposition fails to converge."""


class IterationOverflowError(MuonLabError):
    """Raised when a polynomial or matrix iteration produces non-finite values.

    Carries the offending step index in ``step``.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class DegenerateBulkError(MuonLabError):
    """Raised when the requested bulk singular direction is numerically zero."""


class ConfigError(MuonLabError):
    """Raised for invalid or unknown experiment configuration values."""
