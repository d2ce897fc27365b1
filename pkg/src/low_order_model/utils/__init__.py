"""Utilities for dataset files, configuration loading and checkpoints."""

from .idx_reader import IdxFormatError, IdxLabelRangeError, IdxMagicError, IdxTruncatedError, load_idx
from .config_loader import ConfigLoader, load_run_config
from .checkpoint import CheckpointError, CheckpointVersionError, load_network, save_network

__all__ = [
    "CheckpointError",
    "CheckpointVersionError",
    "ConfigLoader",
    "IdxFormatError",
    "IdxLabelRangeError",
    "IdxMagicError",
    "IdxTruncatedError",
    "load_idx",
    "load_network",
    "load_run_config",
    "save_network",
]
