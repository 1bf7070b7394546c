"""Exception types shared across the package."""


class StructuralError(ValueError):
    """Raised for malformed graph input (self-loops, empty edge sets, ...)."""


class ContractError(ValueError):
    """Raised when an operation is called outside its contract
    (shape mismatches, unsupported degrees, missing classes, ...)."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine fails (eigensolver, Cholesky).

    May carry a ``snapshot`` attribute with the parameter state at failure.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class DatasetError(ValueError):
    """Raised for dataset ingestion problems (missing files, format errors)."""


class ConfigError(ValueError):
    """Raised for invalid experiment configuration files."""
