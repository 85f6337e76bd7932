"""Exception types shared across the package.

Plain ``ValueError`` is used for malformed arguments to individual
operations.  The types below carry intent that callers (notably the CLI)
need to distinguish: configuration problems map to exit code 2, failed
linear algebra to exit code 3.
"""


class ConfigError(ValueError):
    """An experiment or CLI configuration is malformed or inconsistent."""


class NumericError(RuntimeError):
    """A linear-algebra step failed (singular or badly conditioned system)."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class UnsupportedMethodError(RuntimeError):
    """The requested method cannot be applied to the given input shape."""
