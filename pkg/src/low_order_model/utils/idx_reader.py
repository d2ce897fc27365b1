"""Reader for the big-endian IDX containers the MNIST files ship in."""

import gzip
from pathlib import Path

import numpy as np
from loguru import logger
from numpy.typing import NDArray

IMAGES_MAGIC = 2051
LABELS_MAGIC = 2049


class IdxFormatError(Exception):
    """Exception raised for malformed IDX files."""

    pass


class IdxMagicError(IdxFormatError):
    """Exception raised when an IDX file starts with an unknown magic number."""

    pass


class IdxTruncatedError(IdxFormatError):
    """Exception raised when an IDX file is shorter than its header announces."""

    pass


class IdxLabelRangeError(IdxFormatError):
    """Exception raised when a label file holds values outside 0..9."""

    pass


def _read_bytes(path: Path) -> bytes:
    """Read a file, falling back to a gzipped sibling (``name.gz``) when present."""
    gz_path = path.with_name(path.name + ".gz")
    try:
        if not path.exists() and gz_path.exists():
            logger.debug(f"Reading gzipped IDX file {gz_path}")
            with gzip.open(gz_path, "rb") as handle:
                return handle.read()
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as handle:
                return handle.read()
        return path.read_bytes()
    except FileNotFoundError:
        raise
    except OSError as e:
        raise IdxFormatError(f"Cannot read IDX file {path}: {e}") from e


def _header(data: bytes, count: int, path: Path) -> NDArray[np.uint32]:
    if len(data) < 4 * count:
        raise IdxTruncatedError(f"{path}: {len(data)} bytes cannot hold a {4 * count}-byte header")
    return np.frombuffer(data, dtype=">u4", count=count)


def _payload(data: bytes, offset: int, size: int, path: Path) -> NDArray[np.uint8]:
    available = len(data) - offset
    if available < size:
        raise IdxTruncatedError(f"{path}: header announces {size} data bytes, file holds {available}")
    if available > size:
        logger.warning(f"{path}: ignoring {available - size} trailing bytes")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=offset)


def load_idx(path: Path | str) -> NDArray[np.uint8]:
    """
    Parse an IDX images or labels file.

    Args:
        path: Location of the file (a ``.gz`` sibling is used when the plain file is absent)

    Returns:
        ``(count, rows, cols)`` pixel array for image files, ``(count,)`` array for label files

    Raises:
        FileNotFoundError: If neither the file nor its gzipped sibling exists
        IdxMagicError: If the magic number is neither 2051 nor 2049
        IdxTruncatedError: If the file is shorter than announced
        IdxLabelRangeError: If a label lies outside 0..9
    """
    path = Path(path)
    data = _read_bytes(path)
    magic = int(_header(data, 1, path)[0])

    if magic == IMAGES_MAGIC:
        _, count, rows, cols = (int(v) for v in _header(data, 4, path))
        pixels = _payload(data, 16, count * rows * cols, path)
        logger.debug(f"Loaded {count} images of {rows}x{cols} from {path}")
        return pixels.reshape(count, rows, cols)

    if magic == LABELS_MAGIC:
        _, count = (int(v) for v in _header(data, 2, path))
        labels = _payload(data, 8, count, path)
        if labels.size and int(labels.max()) > 9:
            bad = int(np.argmax(labels > 9))
            raise IdxLabelRangeError(f"{path}: label {int(labels[bad])} at index {bad} is outside 0..9")
        logger.debug(f"Loaded {count} labels from {path}")
        return labels

    raise IdxMagicError(f"{path}: unknown IDX magic number {magic} (expected {IMAGES_MAGIC} or {LABELS_MAGIC})")


def write_idx(path: Path | str, array: NDArray[np.uint8]) -> Path:
    """Write a ``(count, rows, cols)`` image array or a ``(count,)`` label array as IDX."""
    path = Path(path)
    values = np.ascontiguousarray(array, dtype=np.uint8)
    if values.ndim == 3:
        header = np.array([IMAGES_MAGIC, *values.shape], dtype=">u4")
    elif values.ndim == 1:
        header = np.array([LABELS_MAGIC, values.shape[0]], dtype=">u4")
    else:
        raise ValueError(f"IDX arrays must have 1 or 3 dimensions, got {values.ndim}")
    path.write_bytes(header.tobytes() + values.tobytes())
    return path
