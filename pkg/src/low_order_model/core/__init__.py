"""Core model: dendritic codes, synaptic memories, somas, processing units and the layered network."""

from .dendritic_code import BinaryVector, DendriticCode, encode
from .synaptic_memory import CountMemory, DenseMemory, RetrievalResult, SynapticMemory, create_memory
from .soma import SpikeRng, decode, probability, spike
from .processing_unit import ProcessingUnit, PUConfig, PUOutput
from .network import Network, NetworkTopology, Prediction, StreamBank, build_topology, vote
from .mnist_pipeline import DatasetError, binarize, extract_windows, run_experiment

__all__ = [
    "BinaryVector",
    "CountMemory",
    "DatasetError",
    "DendriticCode",
    "DenseMemory",
    "Network",
    "NetworkTopology",
    "Prediction",
    "ProcessingUnit",
    "PUConfig",
    "PUOutput",
    "RetrievalResult",
    "SpikeRng",
    "StreamBank",
    "SynapticMemory",
    "binarize",
    "build_topology",
    "create_memory",
    "decode",
    "encode",
    "extract_windows",
    "probability",
    "run_experiment",
    "spike",
    "vote",
]
