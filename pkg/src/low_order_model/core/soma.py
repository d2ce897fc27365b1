"""
Model somas: from graded retrieval signals to label probabilities and spikes.

The nonspiking soma reports ``c`` (total match evidence), spiking soma ``k``
reports ``d_k``; their ratio gives the subjective probability that label bit
``k`` is 1: ``p_k = (d_k / c + 1) / 2``. Unlearned inputs (``c`` at or below
epsilon) get ``p_k = 1/2``.

Spikes are drawn from a Philox counter-based generator keyed by the global
seed and a stream identifier, one stream per processing unit, so results do
not depend on the order in which units run.
"""

import hashlib
from typing import Literal

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..config import settings
from .dendritic_code import BinaryVector
from .synaptic_memory import BatchRetrieval, RetrievalResult

ProbabilityVector = NDArray[np.float64]

_MASK64 = (1 << 64) - 1
_CLAMP_TOLERANCE = 1e-9


def stream_key(seed: int, stream: str) -> int:
    """128-bit Philox key: the stream identifier digest above the 64-bit seed."""
    digest = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
    return (int.from_bytes(digest, "little") << 64) | (seed & _MASK64)


class SpikeRng:
    """A reproducible per-unit stream of uniform draws.

    ``position`` counts draws taken so far; a stream rebuilt from the same
    seed material and position continues with identical draws.
    """

    def __init__(self, seed: int, stream: str, position: int = 0):
        self.seed = seed & _MASK64
        self.stream = stream
        self._bit_generator = np.random.Philox(key=stream_key(self.seed, stream))
        self._generator = np.random.Generator(self._bit_generator)
        self.position = 0
        if position:
            self.skip(position)

    def uniform(self, size: int | tuple[int, ...]) -> NDArray[np.float64]:
        draws = self._generator.random(size)
        self.position += int(draws.size)
        return draws

    def skip(self, count: int) -> None:
        if count < 0:
            raise ValueError("Cannot rewind a spike stream")
        if count:
            self._bit_generator.random_raw(count)
            self.position += count

    def __repr__(self) -> str:
        return f"SpikeRng(seed={self.seed}, stream='{self.stream}', position={self.position})"


def probability(result: RetrievalResult, epsilon: float | None = None) -> ProbabilityVector:
    """Subjective probability that each label bit is 1."""
    eps = settings.retrieval_epsilon if epsilon is None else epsilon
    if result.c <= eps:
        return np.full(result.d.shape, 0.5)
    ratio = result.d / result.c
    if np.any(np.abs(ratio) > 1.0 + _CLAMP_TOLERANCE):
        logger.warning(f"Label evidence exceeds match evidence (d={result.d.tolist()}, c={result.c}); clamping")
    return np.clip((ratio + 1.0) / 2.0, 0.0, 1.0)


def probability_batch(batch: BatchRetrieval, epsilon: float | None = None) -> NDArray[np.float64]:
    """Row-wise ``probability`` for a batch of retrievals."""
    eps = settings.retrieval_epsilon if epsilon is None else epsilon
    learned = batch.c > eps
    safe_c = np.where(learned, batch.c, 1.0)
    ratio = batch.d / safe_c[:, None]
    excess = learned[:, None] & (np.abs(ratio) > 1.0 + _CLAMP_TOLERANCE)
    if excess.any():
        rows = np.flatnonzero(excess.any(axis=1))
        logger.warning(
            f"Label evidence exceeds match evidence in {rows.size} of {len(batch)} rows (first row {rows[0]}); clamping"
        )
    p = (ratio + 1.0) / 2.0
    return np.where(learned[:, None], np.clip(p, 0.0, 1.0), 0.5)


def spike_bits(p: ProbabilityVector, rng: SpikeRng) -> NDArray[np.uint8]:
    """Draw bit k = 1 with probability p_k, independently per bit."""
    return (rng.uniform(p.shape) < p).astype(np.uint8)


def spike(p: ProbabilityVector, rng: SpikeRng) -> BinaryVector:
    """Point estimate of the label sampled from its subjective probability distribution."""
    return BinaryVector(spike_bits(np.asarray(p, dtype=np.float64), rng))


def decode(
    p: NDArray[np.float64], rng: SpikeRng, mode: Literal["max_probability", "spike"] = "max_probability"
) -> NDArray[np.uint8]:
    """Translate probabilities into label bits.

    ``spike`` samples every bit. ``max_probability`` emits 1 above one half and
    0 below; only exact ties are sampled, consuming one draw each in row-major
    order. Works on a single vector or on a batch of rows.
    """
    if mode == "spike":
        return (rng.uniform(p.shape) < p).astype(np.uint8)
    bits = (p > 0.5).astype(np.uint8)
    ties = p == 0.5
    if ties.any():
        bits[ties] = (rng.uniform(int(ties.sum())) < 0.5).astype(np.uint8)
    return bits


def to_bipolar(bits: NDArray[np.uint8] | BinaryVector) -> NDArray[np.int8]:
    """Present {0, 1} spikes as {-1, +1}."""
    values = bits.bits if isinstance(bits, BinaryVector) else np.asarray(bits)
    return (2 * values.astype(np.int8) - 1).astype(np.int8)


def from_bipolar(values: NDArray[np.int8] | list[int]) -> BinaryVector:
    """Map {-1, +1} outputs back to {0, 1} bits."""
    array = np.asarray(values)
    if not np.isin(array, (-1, 1)).all():
        raise ValueError(f"Bipolar outputs hold only -1 and +1, got {array.tolist()}")
    return BinaryVector(((array + 1) // 2).astype(np.uint8))
