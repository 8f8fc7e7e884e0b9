"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so anything user-facing
should raise one of them rather than a bare Exception.
"""


class ConfigurationError(ValueError):
    """Invalid or inconsistent configuration (bad keys, incompatible model/kernel)."""


class DataSchemaError(ValueError):
    """Malformed input data: wrong shapes, missing columns, non-numeric cells."""


class NumericError(ArithmeticError):
    """A numeric operation left its valid domain (non-PSD matrix after max jitter,
    nonpositive kernel diagonal, failed eigendecomposition)."""


class TrainingError(RuntimeError):
    """Hyperparameter estimation failed on every restart.

    Carries per-restart diagnostics in ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or []
