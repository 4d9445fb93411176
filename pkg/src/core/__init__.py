"""Core module containing domain types and exceptions."""

from .exceptions import (
    PLSimError,
    ConfigurationError,
    ValidationError,
    DomainError,
    ShapeMismatchError,
    DegenerateColumnError,
    SimulationError,
    IntegrationError,
    GenerationError,
    FitError,
    TrainingError,
    DivergenceError,
    MetricUndefinedError,
    ArtifactError,
)

from .types import (
    ScalerKind,
    Scenario,
    Command,
    PulseSpec,
    MolecularParams,
    PLScaling,
    TimeGrid,
    ParamRanges,
    FitSettings,
    NetworkConfig,
    TrainConfig,
    TARGET_NAMES,
    FREE_E2_NAMES,
    TARGET_COLUMNS,
)

__all__ = [
    # Exceptions
    "PLSimError",
    "ConfigurationError",
    "ValidationError",
    "DomainError",
    "ShapeMismatchError",
    "DegenerateColumnError",
    "SimulationError",
    "IntegrationError",
    "GenerationError",
    "FitError",
    "TrainingError",
    "DivergenceError",
    "MetricUndefinedError",
    "ArtifactError",
    # Types
    "ScalerKind",
    "Scenario",
    "Command",
    "PulseSpec",
    "MolecularParams",
    "PLScaling",
    "TimeGrid",
    "ParamRanges",
    "FitSettings",
    "NetworkConfig",
    "TrainConfig",
    "TARGET_NAMES",
    "FREE_E2_NAMES",
    "TARGET_COLUMNS",
]
