"""Exception types shared across the package.

The CLI maps these onto process exit codes: usage/config errors -> 1,
numeric check failures -> 2, I/O and format errors -> 3.
"""


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ValueError):
    """Invalid configuration (bad dims, unknown keys, non-divisible groups...)."""


class DomainError(ValueError):
    """Numeric input outside the function domain (NaN/Inf arguments)."""


class FitError(RuntimeError):
    """Nonlinear fit failed to converge; carries the best residual seen."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss; carries the offending step."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FormatError(ValueError):
    """Malformed file (checkpoint, IDX, CSV...)."""
