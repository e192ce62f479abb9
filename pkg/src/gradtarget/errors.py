"""Exception hierarchy shared across the package.

Each class maps to a CLI exit code: ConfigError and DataFormatError
exit with 2, DivergenceError with 3, VerificationError with 1.
"""


class GradTargetError(Exception):
    """Base class for all package errors."""


class ConfigError(GradTargetError):
    """Invalid configuration: bad dimensions, hyper-parameters, paths."""


class DataFormatError(GradTargetError):
    """Malformed dataset file (bad magic, truncation, count mismatch)."""


class DivergenceError(GradTargetError):
    """Non-finite value produced during target solving or training."""

    def __init__(self, message, layer=None, step=None):
        super().__init__(message)
        self.layer = layer
        self.step = step


class VerificationError(GradTargetError):
    """A decomposition or gradient check failed."""
