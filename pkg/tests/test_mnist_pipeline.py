"""Tests for MNIST ingestion, window extraction and the learning protocol."""

import numpy as np
import pandas as pd
import pytest

from src.low_order_model.config import ConfigurationError
from src.low_order_model.core.dendritic_code import BinaryVector
from src.low_order_model.core.mnist_pipeline import (
    DatasetError,
    binarize,
    check_geometry,
    extract_windows,
    load_split,
    run_experiment,
    window_patterns,
    write_metrics,
)
from src.low_order_model.models.config import LayerConfig, RunConfig, SelectionConfig
from src.low_order_model.models.experiment import ExperimentRecord, ExperimentResult


def naive_windows(bits: np.ndarray, window: int, padding: int, offsets: list[tuple[int, int]]) -> list[list[int]]:
    """Double loop over window positions on an explicitly padded grid."""
    side = bits.shape[0] + padding
    padded = [[0] * side for _ in range(side)]
    for r in range(bits.shape[0]):
        for c in range(bits.shape[1]):
            padded[r][c] = int(bits[r, c])
    out = []
    for top in range(side - window + 1):
        for left in range(side - window + 1):
            out.append([padded[top + dr][left + dc] for dr, dc in offsets])
    return out


class TestBinarize:
    """Test cases for thresholding."""

    def test_boundary(self):
        img = np.array([[34, 35], [36, 0]], dtype=np.uint8)
        assert binarize(img).tolist() == [[0, 1], [1, 0]]

    def test_all_zero(self):
        assert not binarize(np.zeros((28, 28), dtype=np.uint8)).any()

    def test_custom_threshold(self):
        assert binarize(np.array([[100]], dtype=np.uint8), threshold=101).tolist() == [[0]]


class TestWindows:
    """Test cases for window extraction."""

    def test_count_and_width(self):
        windows = extract_windows(np.zeros((28, 28), dtype=np.uint8), SelectionConfig())
        assert len(windows) == 484
        assert all(len(w) == 16 and w.pattern == 0 for w in windows)

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(0)
        sel = SelectionConfig()
        for _ in range(5):
            bits = (rng.random((28, 28)) < 0.4).astype(np.uint8)
            expected = naive_windows(bits, sel.window, sel.padding, sel.offsets)
            assert [list(w) for w in extract_windows(bits, sel)] == expected

    def test_single_lit_pixel(self):
        bits = np.zeros((28, 28), dtype=np.uint8)
        bits[0, 0] = 1
        windows = extract_windows(bits, SelectionConfig())
        lit = [index for index, w in enumerate(windows) if w.pattern]
        assert lit == [0]
        assert windows[0].pattern == 1

    def test_pixel_membership_by_enumeration(self):
        bits = np.zeros((28, 28), dtype=np.uint8)
        bits[10, 13] = 1
        sel = SelectionConfig()
        windows = extract_windows(bits, sel)
        expected = {
            top * 22 + left
            for top in range(22)
            for left in range(22)
            if (10 - top, 13 - left) in set(sel.offsets)
        }
        assert {i for i, w in enumerate(windows) if w.pattern} == expected

    def test_bottom_right_padding(self):
        bits = np.ones((28, 28), dtype=np.uint8)
        windows = extract_windows(bits, SelectionConfig())
        # the last window reaches the padded row and column only at offset 7, which is not selected
        assert windows[-1].pattern == 2**16 - 1

    def test_patterns_match_vectors(self):
        rng = np.random.default_rng(1)
        stack = (rng.random((3, 28, 28)) < 0.5).astype(np.uint8)
        sel = SelectionConfig()
        patterns = window_patterns(stack, sel)
        assert patterns.shape == (3, 484)
        for n in range(3):
            assert patterns[n].tolist() == [w.pattern for w in extract_windows(stack[n], sel)]

    @pytest.mark.parametrize(
        "window,padding,side",
        [(8, 1, 22), (7, 0, 22), (8, 0, 21)],
    )
    def test_alternative_geometries(self, window, padding, side):
        sel = SelectionConfig(window=window, padding=padding)
        assert sel.grid_side() == side
        windows = extract_windows(np.zeros((28, 28), dtype=np.uint8), sel)
        assert len(windows) == side * side

    def test_offsets_must_lie_inside_window(self):
        with pytest.raises(ValueError):
            SelectionConfig(window=6)

    def test_custom_selection_order(self):
        bits = np.zeros((28, 28), dtype=np.uint8)
        bits[0, 1] = 1
        sel = SelectionConfig(offsets=[(0, 0), (0, 1)])
        assert extract_windows(bits, sel)[0] == BinaryVector([0, 1])


class TestGeometryCheck:
    """Window grid and selection must fit the topology."""

    def test_default_is_consistent(self):
        check_geometry(RunConfig())

    def test_grid_mismatch(self):
        cfg = RunConfig(selection=SelectionConfig(padding=0))
        with pytest.raises(ConfigurationError):
            check_geometry(cfg)

    def test_offset_count_mismatch(self):
        cfg = RunConfig(
            selection=SelectionConfig(offsets=[(0, 0)]),
            layer1=LayerConfig(input_bits=16),
        )
        with pytest.raises(ConfigurationError):
            check_geometry(cfg)


class TestLoadSplit:
    """Test cases for dataset loading."""

    def test_loads_and_binarizes(self, tiny_config):
        split = load_split(tiny_config.dataset, "train")
        assert len(split) == 60
        assert split.images.shape == (60, 28, 28)
        assert set(np.unique(split.images)) <= {0, 1}
        assert split.labels[:10].tolist() == list(range(10))

    def test_limit(self, tiny_config):
        assert len(load_split(tiny_config.dataset, "test", limit=7)) == 7

    def test_missing_file_names_path(self, tiny_config, tmp_path):
        dataset = tiny_config.dataset.model_copy(update={"dir": tmp_path / "nowhere"})
        with pytest.raises(DatasetError, match="nowhere"):
            load_split(dataset, "train")


class TestExperiment:
    """Test cases for the real-time protocol."""

    def test_records_and_metrics(self, tiny_config):
        metrics = tiny_config.output_dir / "metrics.csv"
        result, network = run_experiment(tiny_config, metrics_path=metrics)
        assert [r.bin_index for r in result.records] == [1, 2, 3]
        assert [r.images_seen for r in result.records] == [20, 40, 60]
        assert network.examples_seen == 60
        df = pd.read_csv(metrics)
        assert list(df.columns) == ["bin_index", "images_seen", "error_rate"]
        assert len(df) == 3
        assert df["error_rate"].tolist() == [r.error_rate for r in result.records]

    def test_learns_the_templates(self, tiny_config):
        result, _ = run_experiment(tiny_config)
        assert result.final_error == 0.0

    def test_deterministic_metrics(self, tiny_config, tmp_path):
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        run_experiment(tiny_config, seed=5, metrics_path=first)
        run_experiment(tiny_config, seed=5, metrics_path=second)
        assert first.read_bytes() == second.read_bytes()

    def test_too_few_training_images(self, tiny_config):
        cfg = tiny_config.model_copy(update={"protocol": tiny_config.protocol.model_copy(update={"bins": 4})})
        with pytest.raises(DatasetError):
            run_experiment(cfg)

    def test_progress_updates(self, tiny_config, mocker):
        progress = mocker.Mock()
        run_experiment(tiny_config, progress=progress, task_id=1)
        progress.update.assert_any_call(1, total=60)
        advanced = sum(call.kwargs.get("advance", 0) for call in progress.update.call_args_list)
        assert advanced == 60


class TestMetricsFile:
    """Test cases for the metrics writer and result model."""

    def test_atomic_rewrite(self, tmp_path):
        path = tmp_path / "out" / "metrics.csv"
        records = [ExperimentRecord(bin_index=1, images_seen=2000, error_rate=0.37)]
        write_metrics(records, path)
        records.append(ExperimentRecord(bin_index=2, images_seen=4000, error_rate=0.2))
        write_metrics(records, path)
        assert path.read_text().splitlines() == ["bin_index,images_seen,error_rate", "1,2000,0.37", "2,4000,0.2"]
        assert [p.name for p in path.parent.iterdir()] == ["metrics.csv"]

    def test_result_accessors(self):
        result = ExperimentResult(
            seed=1,
            fingerprint="x",
            records=[
                ExperimentRecord(bin_index=1, images_seen=2000, error_rate=0.4),
                ExperimentRecord(bin_index=2, images_seen=4000, error_rate=0.1),
            ],
        )
        assert result.first_error == 0.4
        assert result.final_error == 0.1
        assert result.error_at(4000) == 0.1
        assert result.error_at(5000) is None

    def test_records_must_be_in_order(self):
        with pytest.raises(ValueError):
            records = [ExperimentRecord(bin_index=2, images_seen=1, error_rate=0)]
            ExperimentResult(seed=1, fingerprint="x", records=records)
