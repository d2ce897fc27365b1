"""Digit label codes used to supervise the two hidden layers."""

from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .dendritic_code import BinaryVector


def _check_digit(d: int) -> None:
    if not 0 <= d <= 9:
        raise ValueError(f"Digit must be in 0..9, got {d}")


def digit_to_4bit(d: int) -> BinaryVector:
    """Four-bit binary code, most significant bit first: 9 -> [1, 0, 0, 1]."""
    _check_digit(d)
    return BinaryVector((d >> shift) & 1 for shift in (3, 2, 1, 0))


def digit_to_onehot(d: int) -> BinaryVector:
    """Ten-bit one-hot code with bit ``d`` set."""
    _check_digit(d)
    return BinaryVector(1 if i == d else 0 for i in range(10))


@lru_cache(maxsize=2)
def label_table(kind: str) -> NDArray[np.float64]:
    """All ten digit labels as float rows, ready for the learning rules."""
    build = digit_to_4bit if kind == "binary" else digit_to_onehot
    table = np.stack([build(d).bits for d in range(10)]).astype(np.float64)
    table.flags.writeable = False
    return table


def bits_to_int(bits: NDArray[np.uint8]) -> int:
    """Pack label bits so that bit ``i`` of the result is label position ``i + 1``."""
    return sum(int(b) << i for i, b in enumerate(bits))
