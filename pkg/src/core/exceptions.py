"""Custom exceptions for the PL simulation and estimation toolkit."""

from typing import Optional


class PLSimError(Exception):
    """Base exception for all toolkit errors."""

    def __init__(self, message: str, details: Optional[dict] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigurationError(PLSimError):
    """Raised when there are configuration-related errors."""
    pass


class ValidationError(PLSimError):
    """Raised when data validation fails."""
    pass


class DomainError(ValidationError):
    """Raised when a value lies outside the domain an operation accepts."""
    pass


class ShapeMismatchError(ValidationError):
    """Raised when array shapes or lengths do not line up."""

    def __init__(self, message: str, expected: Optional[tuple] = None, got: Optional[tuple] = None,
                 details: Optional[dict] = None):
        super().__init__(message, details)
        self.expected = expected
        self.got = got


class DegenerateColumnError(ValidationError):
    """Raised when a scaler column has zero spread."""

    def __init__(self, message: str, column: int, details: Optional[dict] = None):
        super().__init__(message, details)
        self.column = column


class SimulationError(PLSimError):
    """Base class for forward-model failures."""
    pass


class IntegrationError(SimulationError):
    """Raised when the density matrix leaves its invariants mid-run."""

    def __init__(self, message: str, time_fs: Optional[float] = None, details: Optional[dict] = None):
        super().__init__(message, details)
        self.time_fs = time_fs


class GenerationError(SimulationError):
    """Raised when a dataset row cannot be simulated."""

    def __init__(self, message: str, row: Optional[int] = None, details: Optional[dict] = None):
        super().__init__(message, details)
        self.row = row


class FitError(PLSimError):
    """Raised when the simplex fitter cannot run."""
    pass


class TrainingError(PLSimError):
    """Raised when network training fails."""
    pass


class DivergenceError(TrainingError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, message: str, epoch: Optional[int] = None, details: Optional[dict] = None):
        super().__init__(message, details)
        self.epoch = epoch


class MetricUndefinedError(PLSimError):
    """Raised when a metric has no defined value for the given data."""
    pass


class ArtifactError(PLSimError):
    """Raised when reading or writing an artifact file fails."""
    pass
