"""
Dendritic encoding of binary input vectors.

An m-bit input is expanded into a 2^m-component code with one component per
subset of input positions. Component ``j`` holds the parity of the input bits
selected by the binary expansion of ``j`` (bit ``i`` of ``j`` selects input
position ``i + 1``), so index 0 is the empty subset and singleton indices
reproduce the raw bits.

Centered codes of distinct inputs are orthogonal, which is what makes the
synaptic memory content addressable: the centered inner product is 0 for
different inputs and 2^(m-2) for identical ones.

Internally an input vector is also carried as an integer ``pattern`` whose bit
``i`` is input position ``i + 1``. Memories that never need the full code work
on patterns only; the 2^m components are materialised lazily.
"""

from collections.abc import Iterable, Iterator
from functools import cached_property

import numpy as np
from numpy.typing import NDArray

from ..config import CapacityError, DimensionError, settings


class BinaryVector:
    """An immutable, fixed-length sequence of {0, 1} bits."""

    def __init__(self, bits: Iterable[int] | NDArray[np.uint8]):
        array = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits)
        if array.ndim != 1 or array.size == 0:
            raise DimensionError("A binary vector needs at least one bit")
        if not np.isin(array, (0, 1)).all():
            raise ValueError(f"Binary vectors hold only 0 and 1, got {array.tolist()}")
        frozen = array.astype(np.uint8)
        frozen.flags.writeable = False
        self._bits = frozen

    @classmethod
    def from_string(cls, text: str) -> "BinaryVector":
        """Parse a string such as ``"101"``."""
        text = text.strip()
        if not text or any(ch not in "01" for ch in text):
            raise ValueError(f"Not a bit string: {text!r}")
        return cls(int(ch) for ch in text)

    @classmethod
    def from_pattern(cls, pattern: int, m: int) -> "BinaryVector":
        """Build the vector whose position ``i + 1`` is bit ``i`` of ``pattern``."""
        if pattern < 0 or pattern >> m:
            raise DimensionError(f"Pattern {pattern} does not fit in {m} bits")
        return cls((pattern >> i) & 1 for i in range(m))

    @property
    def bits(self) -> NDArray[np.uint8]:
        return self._bits

    @cached_property
    def pattern(self) -> int:
        """Integer form: input position ``i + 1`` is bit ``i``."""
        return sum(int(bit) << i for i, bit in enumerate(self._bits))

    def to_string(self) -> str:
        return "".join(str(int(b)) for b in self._bits)

    def __len__(self) -> int:
        return int(self._bits.size)

    def __iter__(self) -> Iterator[int]:
        return (int(b) for b in self._bits)

    def __getitem__(self, index: int) -> int:
        return int(self._bits[index])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryVector):
            return NotImplemented
        return bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash((len(self), self.pattern))

    def __repr__(self) -> str:
        return f"BinaryVector('{self.to_string()}')"


def parity(bits: Iterable[int]) -> int:
    """The standard parity function: sum of the bits modulo 2."""
    values = list(bits)
    if not values:
        raise DimensionError("Parity of an empty bit set is undefined")
    return sum(values) % 2


def code_components(pattern: int, m: int) -> NDArray[np.uint8]:
    """Components of the dendritic code of an m-bit pattern, in subset-index order."""
    indices = np.arange(1 << m, dtype=np.uint32)
    return (np.bitwise_count(indices & np.uint32(pattern)) & 1).astype(np.uint8)


class DendriticCode:
    """The 2^m-component parity expansion of an m-bit input."""

    def __init__(self, pattern: int, m: int):
        self.m = m
        self.pattern = pattern

    @classmethod
    def from_components(cls, components: Iterable[int] | NDArray[np.uint8]) -> "DendriticCode":
        """Rebuild a code from explicit components, checking they form a valid code."""
        values = np.asarray(list(components) if not isinstance(components, np.ndarray) else components, dtype=np.uint8)
        length = int(values.size)
        m = length.bit_length() - 1
        if length < 2 or (1 << m) != length:
            raise DimensionError(f"Code length {length} is not a power of two >= 2")
        pattern = sum(int(values[1 << i]) << i for i in range(m))
        code = cls(pattern, m)
        if not np.array_equal(code.components, values):
            raise ValueError("Components are not the parity expansion of any input")
        return code

    @cached_property
    def components(self) -> NDArray[np.uint8]:
        return code_components(self.pattern, self.m)

    @property
    def centered(self) -> NDArray[np.float64]:
        """Centered code: every component shifted by -1/2."""
        return self.components.astype(np.float64) - 0.5

    @property
    def source(self) -> BinaryVector:
        return BinaryVector.from_pattern(self.pattern, self.m)

    def __len__(self) -> int:
        return 1 << self.m

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DendriticCode):
            return NotImplemented
        return self.m == other.m and self.pattern == other.pattern

    def __hash__(self) -> int:
        return hash((self.m, self.pattern))

    def __repr__(self) -> str:
        return f"DendriticCode(m={self.m}, source='{self.source.to_string()}')"


def encode(v: BinaryVector, max_bits: int | None = None) -> DendriticCode:
    """Encode an input vector into its dendritic code.

    Raises:
        CapacityError: If the input is longer than the configured maximum.
    """
    limit = settings.max_code_bits if max_bits is None else max_bits
    if len(v) > limit:
        raise CapacityError("Input length", len(v), limit)
    return DendriticCode(v.pattern, len(v))


def centered_inner_product(a: DendriticCode, b: DendriticCode) -> float:
    """Inner product of two centered codes.

    Computed by bit counting on packed components: every agreeing component
    contributes +1/4 and every disagreeing one -1/4.
    """
    if len(a) != len(b):
        raise DimensionError(f"Code lengths differ: {len(a)} != {len(b)}")
    packed_a = np.packbits(a.components)
    packed_b = np.packbits(b.components)
    disagreements = int(np.bitwise_count(packed_a ^ packed_b).sum())
    return (len(a) - 2 * disagreements) / 4


def component_subset(index: int, m: int) -> frozenset[int]:
    """Input positions (1-based) whose parity occupies code position ``index``."""
    if not 0 <= index < (1 << m):
        raise DimensionError(f"Code index {index} is outside [0, {1 << m})")
    return frozenset(i + 1 for i in range(m) if (index >> i) & 1)
