"""
Full real-time learning curve on the standard MNIST files.

Skipped unless the four IDX files are present in ``LOM_DATASET_DIR``
(default ``./data/mnist``). Takes several minutes.
"""

import pytest

from src.low_order_model.config import settings
from src.low_order_model.core.mnist_pipeline import run_experiment
from src.low_order_model.models.config import DatasetConfig, RunConfig

FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def dataset_present() -> bool:
    return all(
        (settings.dataset_dir / name).exists() or (settings.dataset_dir / f"{name}.gz").exists() for name in FILES
    )


@pytest.mark.slow
@pytest.mark.integration
@pytest.mark.timeout(3600)
@pytest.mark.skipif(not dataset_present(), reason="MNIST IDX files not found")
class TestMnistReproduction:
    """The default configuration reproduces the learning curve within tolerance."""

    def test_learning_curve(self, tmp_path):
        cfg = RunConfig(output_dir=tmp_path, dataset=DatasetConfig(dir=settings.dataset_dir))
        result, _ = run_experiment(cfg, metrics_path=tmp_path / "metrics.csv")
        assert len(result.records) == 30
        assert 0.25 <= result.first_error <= 0.50
        assert result.error_at(12000) < 0.10
        assert result.final_error <= 0.06
        assert result.final_error < result.first_error
