"""Exception hierarchy shared across the package."""


class FatMarginError(Exception):
    """Base class for all package errors."""


class StructureError(FatMarginError, ValueError):
    """Mismatched lengths or shapes in inputs."""


class ConfigurationError(FatMarginError, ValueError):
    """Invalid hyperparameters or options."""


class DataFormatError(FatMarginError, ValueError):
    """A data or model file could not be parsed."""


class TrainingError(FatMarginError, RuntimeError):
    """The solver did not return an optimal solution."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status
