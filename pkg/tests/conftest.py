"""
Shared pytest fixtures: small topologies and tiny MNIST-format datasets.
"""

from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from src.low_order_model.models.config import (
    DatasetConfig,
    LayerConfig,
    ProtocolConfig,
    RunConfig,
    SelectionConfig,
)
from src.low_order_model.utils.idx_reader import write_idx

TINY_TRAIN = 60
TINY_TEST = 30


def digit_templates(seed: int = 3) -> np.ndarray:
    """Ten random 28x28 grayscale images, one per digit."""
    rng = np.random.default_rng(seed)
    return (rng.random((10, 28, 28)) < 0.3).astype(np.uint8) * 200


@pytest.fixture
def runner():
    """Create a Click test runner."""
    return CliRunner()


@pytest.fixture
def mnist_dir(tmp_path) -> Path:
    """IDX files whose images are exact copies of one template per digit, in label order 0..9 repeating."""
    directory = tmp_path / "mnist"
    directory.mkdir()
    templates = digit_templates()
    train_labels = (np.arange(TINY_TRAIN) % 10).astype(np.uint8)
    test_labels = (np.arange(TINY_TEST) % 10).astype(np.uint8)
    write_idx(directory / "train-images-idx3-ubyte", templates[train_labels])
    write_idx(directory / "train-labels-idx1-ubyte", train_labels)
    write_idx(directory / "t10k-images-idx3-ubyte", templates[test_labels])
    write_idx(directory / "t10k-labels-idx1-ubyte", test_labels)
    return directory


@pytest.fixture
def tiny_config(tmp_path, mnist_dir) -> RunConfig:
    """A 4x4 / 2x2 topology: the default window and selection with stride 7, three bins of 20 images."""
    return RunConfig(
        seed=7,
        output_dir=tmp_path / "run",
        dataset=DatasetConfig(dir=mnist_dir),
        selection=SelectionConfig(stride=7),
        layer1=LayerConfig(rows=4, cols=4),
        layer2=LayerConfig(rows=2, cols=2, input_bits=16, label_bits=10, learn_policy="always"),
        protocol=ProtocolConfig(bins=3, bin_size=20),
    )


@pytest.fixture
def small_config() -> RunConfig:
    """A 2x2 grid of 4-bit layer-1 units, each feeding its own layer-2 unit."""
    return RunConfig(
        seed=11,
        layer1=LayerConfig(rows=2, cols=2, input_bits=4, max_tier=1),
        layer2=LayerConfig(rows=2, cols=2, input_bits=4, label_bits=10, max_tier=1, learn_policy="always"),
        block=1,
    )


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config) -> Path:
    """The tiny configuration written as YAML."""
    path = tmp_path / "tiny.yml"
    path.write_text(yaml.safe_dump(tiny_config.model_dump(mode="json", by_alias=True)), encoding="utf-8")
    return path
