"""Core модули лаборатории."""
from .models import (
    DyadicCube,
    DyadicMartingale,
    ExperimentConfig,
    FunctionKind,
    FunctionSpec,
    KernelPropertyReport,
    LogEntry,
    MeasureName,
    SignedMeasure,
)

__all__ = [
    "DyadicCube",
    "DyadicMartingale",
    "ExperimentConfig",
    "FunctionKind",
    "FunctionSpec",
    "KernelPropertyReport",
    "LogEntry",
    "MeasureName",
    "SignedMeasure",
]
