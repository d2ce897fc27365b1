"""Data models for run configuration and experiment results."""

from .config import (
    DatasetConfig,
    LayerConfig,
    LearningParams,
    ProtocolConfig,
    RunConfig,
    SelectionConfig,
)
from .experiment import ExperimentRecord, ExperimentResult

__all__ = [
    "DatasetConfig",
    "ExperimentRecord",
    "ExperimentResult",
    "LayerConfig",
    "LearningParams",
    "ProtocolConfig",
    "RunConfig",
    "SelectionConfig",
]
