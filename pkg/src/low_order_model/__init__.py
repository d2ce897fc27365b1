"""
Low-order model - an online associative learner built from processing units.

Each processing unit stores binary inputs through their dendritic codes (the
parities of every input subset) in covariance-trained synaptic rows, answers
queries with a graded match signal, and generalizes to unseen inputs by
ignoring progressively more input bits. Units are stacked into a two-layer
grid that learns MNIST digits online, one image at a time.

Modules:
    cli: Command-line interface (experiment, train, eval, encode, inspect)
    core: Encoder, synaptic memories, somas, processing units, network and MNIST pipeline
    models: Pydantic run configuration and experiment records
    utils: IDX reader, YAML configuration loader and network checkpoints

Usage Examples:
    # CLI usage
    lom encode 101
    lom experiment --config configs/experiment.yml --seed 7

    # Python API usage
    from low_order_model.core.processing_unit import ProcessingUnit, PUConfig
    from low_order_model.core.dendritic_code import BinaryVector

    unit = ProcessingUnit(PUConfig(m=3, R=2))
    unit.learn_supervised(BinaryVector.from_string("101"), BinaryVector.from_string("10"))
    unit.retrieve(BinaryVector.from_string("101")).p  # array([1., 0.])
"""

__version__ = "0.1.0"
__license__ = "MIT"

from .config import CapacityError, ConfigurationError, DimensionError, Settings, settings
from .core.dendritic_code import BinaryVector, DendriticCode, encode
from .core.network import Network, Prediction
from .core.processing_unit import ProcessingUnit, PUConfig
from .models.config import RunConfig

__all__ = [
    "BinaryVector",
    "CapacityError",
    "ConfigurationError",
    "DendriticCode",
    "DimensionError",
    "Network",
    "Prediction",
    "ProcessingUnit",
    "PUConfig",
    "RunConfig",
    "Settings",
    "encode",
    "settings",
]
