"""
MNIST ingestion and the real-time learning experiment.

Images are binarized, padded and scanned by a sliding window; from every
window position a fixed selection of pixels forms the input of one layer-1
unit. Training then proceeds bin by bin in file order, with a full test pass
after each bin.
"""

import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import NDArray
from rich.progress import Progress, TaskID

from ..config import ConfigurationError
from ..models.config import DatasetConfig, RunConfig, SelectionConfig
from ..models.experiment import ExperimentRecord, ExperimentResult
from ..utils.idx_reader import load_idx
from .dendritic_code import BinaryVector
from .labels import digit_to_4bit, digit_to_onehot
from .network import Network

METRICS_COLUMNS = ["bin_index", "images_seen", "error_rate"]


class DatasetError(Exception):
    """Exception raised when the MNIST files are missing or inconsistent."""

    pass


@dataclass
class Split:
    """Binarized images of one split together with their labels."""

    images: NDArray[np.uint8]
    labels: NDArray[np.uint8]

    def __len__(self) -> int:
        return int(self.labels.shape[0])


def binarize(img: NDArray[np.uint8], threshold: int = 35) -> NDArray[np.uint8]:
    """Pixels at or above ``threshold`` become 1, the rest 0. Works on one image or a stack."""
    return (np.asarray(img) >= threshold).astype(np.uint8)


def check_geometry(cfg: RunConfig, image_side: int = 28) -> None:
    """Ensure window grid and selection agree with the layer-1 topology."""
    side = cfg.selection.grid_side(image_side)
    if (cfg.layer1.rows, cfg.layer1.cols) != (side, side):
        raise ConfigurationError(
            f"A {cfg.selection.window}x{cfg.selection.window} window with padding {cfg.selection.padding} "
            f"and stride {cfg.selection.stride} gives a {side}x{side} grid, "
            f"but layer 1 is {cfg.layer1.rows}x{cfg.layer1.cols}"
        )
    if len(cfg.selection.offsets) != cfg.layer1.input_bits:
        raise ConfigurationError(
            f"Selection reads {len(cfg.selection.offsets)} pixels but layer-1 units take {cfg.layer1.input_bits} bits"
        )


def _window_bits(bits: NDArray[np.uint8], sel: SelectionConfig) -> NDArray[np.uint8]:
    """(..., grid, grid, len(offsets)) selected pixels of every window position."""
    pad = [(0, 0)] * (bits.ndim - 2) + [(0, sel.padding), (0, sel.padding)]
    padded = np.pad(bits, pad)
    windows = sliding_window_view(padded, (sel.window, sel.window), axis=(-2, -1))
    windows = windows[..., :: sel.stride, :: sel.stride, :, :]
    rows = np.array([r for r, _ in sel.offsets])
    cols = np.array([c for _, c in sel.offsets])
    return windows[..., rows, cols]


def extract_windows(bits: NDArray[np.uint8], sel: SelectionConfig) -> list[BinaryVector]:
    """
    Window inputs of one binarized image, row-major over window positions.

    The grid is zero-padded at the bottom and right by ``sel.padding`` before
    an ``sel.window``-square window slides over it; each window contributes its
    selected pixels in the selection's order.
    """
    selected = _window_bits(np.asarray(bits, dtype=np.uint8), sel)
    return [BinaryVector(row) for row in selected.reshape(-1, selected.shape[-1])]


def window_patterns(bits: NDArray[np.uint8], sel: SelectionConfig) -> NDArray[np.uint64]:
    """Integer input patterns (images x window positions) for a stack of binarized images.

    Selected pixel ``i`` becomes bit ``i`` of the pattern, matching ``BinaryVector.pattern``.
    """
    stack = np.asarray(bits, dtype=np.uint8)
    if stack.ndim == 2:
        stack = stack[None]
    selected = _window_bits(stack, sel).astype(np.uint64)
    weights = np.left_shift(np.uint64(1), np.arange(selected.shape[-1], dtype=np.uint64))
    patterns = (selected * weights).sum(axis=-1, dtype=np.uint64)
    return patterns.reshape(stack.shape[0], -1)


def load_split(dataset: DatasetConfig, split: str, limit: int | None = None) -> Split:
    """Load and binarize the ``train`` or ``test`` split."""
    image_path = dataset.path(f"{split}_images")
    label_path = dataset.path(f"{split}_labels")
    try:
        images = load_idx(image_path)
        labels = load_idx(label_path)
    except FileNotFoundError as e:
        raise DatasetError(f"MNIST file not found: {e.filename}") from e
    if images.ndim != 3 or labels.ndim != 1:
        raise DatasetError(f"{image_path} must hold images and {label_path} labels")
    if images.shape[0] != labels.shape[0]:
        raise DatasetError(f"{image_path} holds {images.shape[0]} images but {label_path} {labels.shape[0]} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    logger.info(f"Loaded {labels.shape[0]} {split} images from {dataset.dir}")
    return Split(images=binarize(images, dataset.binarize_threshold), labels=labels)


def write_metrics(records: list[ExperimentRecord], path: Path) -> Path:
    """Write the learning curve as CSV, replacing any previous file atomically."""
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame([record.to_csv_row() for record in records], columns=METRICS_COLUMNS)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            df.to_csv(handle, index=False, lineterminator="\n")
        os.replace(tmp_name, path)
    except Exception:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def train_images(
    network: Network,
    patterns: NDArray[np.uint64],
    labels: NDArray[np.uint8],
    progress: Progress | None = None,
    task_id: TaskID | None = None,
) -> int:
    """Learn images one after another; returns how many new layer-1 patterns were stored."""
    stored = 0
    for n, (row, digit) in enumerate(zip(patterns, labels, strict=True)):
        stored += network.train_example(row.tolist(), int(digit))
        if progress is not None and task_id is not None and (n + 1) % 100 == 0:
            progress.update(task_id, advance=100)
    if progress is not None and task_id is not None:
        progress.update(task_id, advance=len(labels) % 100)
    return stored


def run_experiment(
    cfg: RunConfig,
    seed: int | None = None,
    metrics_path: Path | None = None,
    network: Network | None = None,
    progress: Progress | None = None,
    task_id: TaskID | None = None,
) -> tuple[ExperimentResult, Network]:
    """
    Run the real-time protocol: train each bin in file order, then score the test set.

    Args:
        cfg: Run configuration
        seed: Overrides ``cfg.seed`` when given
        metrics_path: CSV rewritten after every bin when given
        network: Existing network to continue training (a fresh one is built otherwise)
        progress: Optional Rich progress instance
        task_id: Optional task ID for progress updates

    Returns:
        The learning curve and the trained network

    Raises:
        ConfigurationError: If the window geometry does not match the topology
        DatasetError: If the training set is too small for the protocol or files are missing
    """
    if seed is not None and seed != cfg.seed:
        cfg = cfg.model_copy(update={"seed": seed})
    check_geometry(cfg)
    protocol = cfg.protocol
    needed = protocol.bins * protocol.bin_size

    train = load_split(cfg.dataset, "train", limit=needed)
    if len(train) < needed:
        raise DatasetError(
            f"{protocol.bins} bins of {protocol.bin_size} need {needed} training images, found {len(train)}"
        )
    test = load_split(cfg.dataset, "test", limit=protocol.test_limit)
    test_patterns = window_patterns(test.images, cfg.selection)

    network = network or Network(cfg)
    result = ExperimentResult(seed=cfg.seed, fingerprint=cfg.fingerprint())
    logger.info(
        f"Starting experiment: {protocol.bins} bins of {protocol.bin_size} images, "
        f"{len(test)} test images, seed {cfg.seed}"
    )
    if progress is not None and task_id is not None:
        progress.update(task_id, total=needed)

    for bin_index in range(1, protocol.bins + 1):
        start = (bin_index - 1) * protocol.bin_size
        stop = start + protocol.bin_size
        bin_patterns = window_patterns(train.images[start:stop], cfg.selection)
        stored = train_images(network, bin_patterns, train.labels[start:stop], progress, task_id)
        evaluation = network.evaluate(test_patterns, test.labels, seed=cfg.seed)
        record = ExperimentRecord(
            bin_index=bin_index,
            images_seen=stop,
            error_rate=evaluation.error_rate,
            fallback_count=evaluation.fallback_count,
            mean_voters=evaluation.mean_voters,
            new_patterns=stored,
        )
        result.records.append(record)
        logger.info(
            f"Bin {bin_index}/{protocol.bins}: {stop} images seen, error {record.error_rate:.4f}, "
            f"{stored} new layer-1 patterns, {record.mean_voters:.1f} voters per image"
        )
        if metrics_path is not None:
            write_metrics(result.records, metrics_path)

    return result, network


__all__ = [
    "DatasetError",
    "Split",
    "binarize",
    "check_geometry",
    "digit_to_4bit",
    "digit_to_onehot",
    "extract_windows",
    "load_idx",
    "load_split",
    "run_experiment",
    "train_images",
    "window_patterns",
    "write_metrics",
]
