"""
Synaptic memories: covariance/accumulation learning and masked retrieval.

A memory holds the rows D (one per label bit) and C of a processing unit.
Learning a code ``x`` with label ``r`` applies

    D_kj <- lambda * D_kj + Lambda * (r_k - u_center) * (x_j - v_center)
    C_j  <- lambda * C_j  + Lambda / 2 * (x_j - v_center)

and retrieval of a query ``q`` under a mask over ignored input bits returns

    d_k = sum_j D_kj * mask_j * (q_j - v_center)
    c   = sum_j C_j  * mask_j * (q_j - v_center)

Two realisations honour the same contract:

* ``DenseMemory`` stores D and C literally over all 2^m code positions. It is
  only practical for small m and is kept for cross-checking.
* ``CountMemory`` stores, per learned input pattern, the accumulated label
  evidence. Orthogonality of centered codes makes the two equivalent: a stored
  pattern contributes 2^(m-k-2) times its evidence to a query that agrees with
  it outside the k masked bits, and nothing otherwise.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import ClassVar

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..config import CapacityError, ConfigurationError, DimensionError, settings
from ..models.config import Generalization, LearningParams, MemoryKind
from .dendritic_code import DendriticCode

# Above this many input bits the batched lookup uses binary search instead of a dense table.
DENSE_LOOKUP_BITS = 20


@dataclass(frozen=True)
class MaskTier:
    """All masks that ignore exactly ``k`` of the ``m`` input bits.

    Each mask is a bitset of ignored input bits (bit ``i`` is input position
    ``i + 1``). Code position ``j`` survives a mask when ``j & mask == 0``.
    """

    k: int
    m: int
    masks: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.masks)

    @staticmethod
    def ignored_positions(mask: int) -> frozenset[int]:
        return frozenset(i + 1 for i in range(mask.bit_length()) if (mask >> i) & 1)

    def survivors(self, mask: int) -> NDArray[np.bool_]:
        return surviving_positions(self.m, mask)


@dataclass(frozen=True)
class RetrievalResult:
    """Graded soma signals for one query."""

    d: NDArray[np.float64]
    c: float
    tier_used: int | None


@dataclass(frozen=True)
class BatchRetrieval:
    """Graded soma signals for many queries; ``tier_used`` is -1 when nothing matched."""

    d: NDArray[np.float64]
    c: NDArray[np.float64]
    tier_used: NDArray[np.int64]

    def __len__(self) -> int:
        return int(self.c.size)

    def row(self, index: int) -> RetrievalResult:
        tier = int(self.tier_used[index])
        return RetrievalResult(self.d[index].copy(), float(self.c[index]), tier if tier >= 0 else None)


def mask_from_positions(positions: set[int] | frozenset[int] | list[int]) -> int:
    """Bitset mask for 1-based input positions."""
    return sum(1 << (p - 1) for p in set(positions))


def check_tier_depth(m: int, max_tier: int) -> None:
    if max_tier < 0:
        raise ValueError(f"max_tier must be non-negative, got {max_tier}")
    limit = max(m - 2, 0)
    if max_tier > limit:
        raise CapacityError("Generalization depth", max_tier, limit)


def make_mask_tiers(m: int, max_tier: int) -> list[MaskTier]:
    """Tiers 0..max_tier, tier k enumerating every size-k subset of input bits."""
    check_tier_depth(m, max_tier)
    return [
        MaskTier(k, m, tuple(sum(1 << i for i in combo) for combo in combinations(range(m), k)))
        for k in range(max_tier + 1)
    ]


@lru_cache(maxsize=4096)
def surviving_positions(m: int, mask: int) -> NDArray[np.bool_]:
    survivors = (np.arange(1 << m, dtype=np.int64) & mask) == 0
    survivors.flags.writeable = False
    return survivors


@lru_cache(maxsize=64)
def shell_offsets(m: int, h: int) -> NDArray[np.uint64]:
    """Every m-bit value with exactly h bits set."""
    offsets = np.array([sum(1 << i for i in combo) for combo in combinations(range(m), h)], dtype=np.uint64)
    offsets.flags.writeable = False
    return offsets


@lru_cache(maxsize=256)
def shell_coefficients(m: int, k: int) -> NDArray[np.float64]:
    """Number of size-k masks covering a difference of h bits, indexed by h."""
    coefficients = np.array([math.comb(m - h, k - h) if h <= k else 0 for h in range(m + 1)], dtype=np.float64)
    coefficients.flags.writeable = False
    return coefficients


def default_tier_weights(m: int, max_tier: int) -> list[float]:
    return [math.ldexp(1.0, -k * (m + 1)) for k in range(max_tier + 1)]


def tier_scale(m: int, k: int) -> float:
    """Centered inner product of a code with itself once k input bits are masked."""
    return math.ldexp(1.0, m - k - 2)


class SynapticMemory(ABC):
    """The D and C synaptic rows of one processing unit."""

    kind: ClassVar[MemoryKind]

    def __init__(self, m: int, R: int, params: LearningParams | None = None):
        if m < 1 or R < 1:
            raise DimensionError(f"Memory needs m >= 1 and R >= 1, got m={m}, R={R}")
        self.m = m
        self.R = R
        self.params = params or LearningParams()
        self.learn_count = 0
        self.epsilon = settings.retrieval_epsilon

    def _check_code(self, code: DendriticCode) -> None:
        if code.m != self.m:
            raise DimensionError(f"Code built from {code.m} bits, memory expects {self.m}")

    def _check_mask(self, mask: int) -> None:
        if mask < 0 or mask >> self.m:
            raise DimensionError(f"Mask {mask:#x} names input positions beyond the {self.m} bits of this memory")

    def _check_label(self, label: NDArray[np.float64] | list[int] | tuple[int, ...]) -> NDArray[np.float64]:
        values = np.asarray(label, dtype=np.float64)
        if values.shape != (self.R,):
            raise DimensionError(f"Label has shape {values.shape}, memory expects ({self.R},)")
        return values

    @abstractmethod
    def learn(self, code: DendriticCode, label: NDArray[np.float64] | list[int] | tuple[int, ...]) -> None:
        """Apply the covariance rule to D and the accumulation rule to C."""

    @abstractmethod
    def retrieve_raw(self, code: DendriticCode, mask: int = 0) -> tuple[NDArray[np.float64], float]:
        """Return (d, c) for one query under one mask."""

    @abstractmethod
    def tier_evidence(self, code: DendriticCode, max_tier: int) -> list[tuple[NDArray[np.float64], float]]:
        """Return (d, c) summed over every mask of each tier 0..max_tier."""

    @abstractmethod
    def pattern_evidence(self) -> tuple[NDArray[np.uint64], NDArray[np.float64], NDArray[np.float64]]:
        """Stored patterns with their exact-match (c, d) evidence."""

    @abstractmethod
    def state_arrays(self) -> dict[str, NDArray]:
        """Arrays that fully describe the learned state."""

    @abstractmethod
    def load_state_arrays(self, arrays: dict[str, NDArray]) -> None:
        """Restore the learned state written by ``state_arrays``."""

    def seen(self, code: DendriticCode) -> bool:
        """Whether the exact input has been learned (tier-0 evidence above epsilon)."""
        _, c = self.retrieve_raw(code)
        return c > self.epsilon

    def learn_pattern(self, pattern: int, label: NDArray[np.float64]) -> None:
        self.learn(DendriticCode(pattern, self.m), label)

    def seen_pattern(self, pattern: int) -> bool:
        return self.seen(DendriticCode(pattern, self.m))

    def exact_evidence(self, pattern: int) -> tuple[NDArray[np.float64], float] | None:
        d, c = self.retrieve_raw(DendriticCode(pattern, self.m))
        return (d, c) if c > self.epsilon else None

    def retrieve_generalized(
        self,
        code: DendriticCode,
        max_tier: int,
        mode: Generalization = "tiered",
        tier_weights: list[float] | None = None,
    ) -> RetrievalResult:
        """Answer a query from the largest matching subvector.

        In ``tiered`` mode the first tier with c > epsilon wins. In ``weighted``
        mode all tiers are combined with per-tier weights.
        """
        self._check_code(code)
        check_tier_depth(self.m, max_tier)
        evidence = self.tier_evidence(code, max_tier)
        d_tiers = np.stack([d for d, _ in evidence])[:, None, :]
        c_tiers = np.array([[c] for _, c in evidence])
        batch = self._combine(d_tiers, c_tiers, mode, tier_weights)
        return batch.row(0)

    def retrieve_generalized_batch(
        self,
        patterns: NDArray[np.uint64],
        max_tier: int,
        mode: Generalization = "tiered",
        tier_weights: list[float] | None = None,
        chunk_size: int = 1024,
    ) -> BatchRetrieval:
        """Generalized retrieval for many input patterns at once."""
        check_tier_depth(self.m, max_tier)
        queries = np.asarray(patterns, dtype=np.uint64)
        d_tiers = np.zeros((max_tier + 1, queries.size, self.R))
        c_tiers = np.zeros((max_tier + 1, queries.size))
        for n, pattern in enumerate(queries):
            for k, (d, c) in enumerate(self.tier_evidence(DendriticCode(int(pattern), self.m), max_tier)):
                d_tiers[k, n] = d
                c_tiers[k, n] = c
        return self._combine(d_tiers, c_tiers, mode, tier_weights)

    def _combine(
        self,
        d_tiers: NDArray[np.float64],
        c_tiers: NDArray[np.float64],
        mode: Generalization,
        tier_weights: list[float] | None,
    ) -> BatchRetrieval:
        hits = c_tiers > self.epsilon
        matched = hits.any(axis=0)
        first = np.where(matched, hits.argmax(axis=0), -1).astype(np.int64)
        n = c_tiers.shape[1]
        if mode == "tiered":
            chosen = np.clip(first, 0, None)
            d = np.where(matched[:, None], d_tiers[chosen, np.arange(n)], 0.0)
            c = np.where(matched, c_tiers[chosen, np.arange(n)], 0.0)
            return BatchRetrieval(d, c, first)
        weights = tier_weights or default_tier_weights(self.m, c_tiers.shape[0] - 1)
        if len(weights) < c_tiers.shape[0]:
            raise ConfigurationError(f"{len(weights)} tier weights given for {c_tiers.shape[0]} tiers")
        w = np.asarray(weights[: c_tiers.shape[0]], dtype=np.float64)
        d = np.einsum("k,knr->nr", w, d_tiers)
        c = w @ c_tiers
        return BatchRetrieval(d, c, first)


class DenseMemory(SynapticMemory):
    """Literal D (R x 2^m) and C (2^m) weight rows.

    Supports running-average centering, where the centering constants are the
    mean code and label activity over all learned examples so far.
    """

    kind = "dense"

    def __init__(self, m: int, R: int, params: LearningParams | None = None, max_bits: int | None = None):
        super().__init__(m, R, params)
        limit = settings.max_code_bits if max_bits is None else max_bits
        if m > limit:
            raise CapacityError("Input length", m, limit)
        size = 1 << m
        self.D = np.zeros((R, size))
        self.C = np.zeros(size)
        self._code_sum = np.zeros(size)
        self._label_sum = np.zeros(R)

    def _centers(self) -> tuple[NDArray[np.float64] | float, NDArray[np.float64] | float]:
        if self.params.centering == "fixed" or self.learn_count == 0:
            return self.params.u_center, self.params.v_center
        return self._label_sum / self.learn_count, self._code_sum / self.learn_count

    def learn(self, code: DendriticCode, label: NDArray[np.float64] | list[int] | tuple[int, ...]) -> None:
        self._check_code(code)
        r = self._check_label(label)
        x = code.components.astype(np.float64)
        self.learn_count += 1
        if self.params.centering == "running":
            self._code_sum += x
            self._label_sum += r
        u_center, v_center = self._centers()
        lam, scale = self.params.forgetting, self.params.scale
        self.D *= lam
        self.D += scale * np.outer(r - u_center, x - v_center)
        self.C *= lam
        self.C += (scale / 2) * (x - v_center)

    def retrieve_raw(self, code: DendriticCode, mask: int = 0) -> tuple[NDArray[np.float64], float]:
        self._check_code(code)
        self._check_mask(mask)
        _, v_center = self._centers()
        x = np.where(surviving_positions(self.m, mask), code.components - v_center, 0.0)
        return self.D @ x, float(self.C @ x)

    def tier_evidence(self, code: DendriticCode, max_tier: int) -> list[tuple[NDArray[np.float64], float]]:
        evidence = []
        for tier in make_mask_tiers(self.m, max_tier):
            d_sum = np.zeros(self.R)
            c_sum = 0.0
            for mask in tier.masks:
                d, c = self.retrieve_raw(code, mask)
                d_sum += d
                c_sum += c
            evidence.append((d_sum, c_sum))
        return evidence

    def pattern_evidence(self) -> tuple[NDArray[np.uint64], NDArray[np.float64], NDArray[np.float64]]:
        keys, cs, ds = [], [], []
        for pattern in range(1 << self.m):
            d, c = self.retrieve_raw(DendriticCode(pattern, self.m))
            if c > self.epsilon:
                keys.append(pattern)
                cs.append(c)
                ds.append(d)
        return (
            np.array(keys, dtype=np.uint64),
            np.array(cs, dtype=np.float64),
            np.array(ds, dtype=np.float64).reshape(len(keys), self.R),
        )

    def state_arrays(self) -> dict[str, NDArray]:
        return {"D": self.D, "C": self.C, "code_sum": self._code_sum, "label_sum": self._label_sum}

    def load_state_arrays(self, arrays: dict[str, NDArray]) -> None:
        size = 1 << self.m
        if arrays["D"].shape != (self.R, size) or arrays["C"].shape != (size,):
            raise DimensionError("Dense state arrays do not match the memory dimensions")
        self.D = arrays["D"].astype(np.float64).copy()
        self.C = arrays["C"].astype(np.float64).copy()
        self._code_sum = arrays["code_sum"].astype(np.float64).copy()
        self._label_sum = arrays["label_sum"].astype(np.float64).copy()


class _Entry:
    __slots__ = ("weight", "sums", "stamp")

    def __init__(self, weight: float, sums: NDArray[np.float64], stamp: int):
        self.weight = weight
        self.sums = sums
        self.stamp = stamp


@dataclass
class _Snapshot:
    keys: NDArray[np.uint64]
    weights: NDArray[np.float64]
    sums: NDArray[np.float64]
    weight_table: NDArray[np.float64] | None = None
    sums_table: NDArray[np.float64] | None = None


class CountMemory(SynapticMemory):
    """Pattern -> accumulated evidence map.

    Entry values are kept as of their last update (``stamp``) and decayed by
    the forgetting factor lazily when read or updated, so a learn touches one
    entry only.
    """

    kind = "count"

    def __init__(self, m: int, R: int, params: LearningParams | None = None):
        super().__init__(m, R, params)
        if m > 63:
            raise CapacityError("Input length", m, 63)
        if self.params.centering != "fixed" or self.params.v_center != 0.5:
            raise ConfigurationError("Count memories require fixed centering with v_center = 0.5")
        self._entries: dict[int, _Entry] = {}
        self._snapshot: _Snapshot | None = None

    def __len__(self) -> int:
        return len(self._entries)

    def _decay(self, stamp: int) -> float:
        lam = self.params.forgetting
        return 1.0 if lam == 1.0 else lam ** (self.learn_count - stamp)

    def learn(self, code: DendriticCode, label: NDArray[np.float64] | list[int] | tuple[int, ...]) -> None:
        self._check_code(code)
        self.learn_pattern(code.pattern, self._check_label(label))

    def learn_pattern(self, pattern: int, label: NDArray[np.float64]) -> None:
        """Learn one input given as an integer pattern; ``label`` must already be validated."""
        scale = self.params.scale
        now = self.learn_count + 1
        entry = self._entries.get(pattern)
        if entry is None:
            self._entries[pattern] = _Entry(scale / 2, scale * (label - self.params.u_center), now)
        else:
            lam = self.params.forgetting
            if lam != 1.0:
                decay = lam ** (now - entry.stamp)
                entry.weight *= decay
                entry.sums *= decay
            entry.weight += scale / 2
            entry.sums += scale * (label - self.params.u_center)
            entry.stamp = now
        self.learn_count = now
        self._snapshot = None

    def exact_evidence(self, pattern: int) -> tuple[NDArray[np.float64], float] | None:
        """Tier-0 (d, c) for a pattern, or None when it was never learned."""
        entry = self._entries.get(pattern)
        if entry is None:
            return None
        factor = tier_scale(self.m, 0) * self._decay(entry.stamp)
        return entry.sums * factor, entry.weight * factor

    def seen(self, code: DendriticCode) -> bool:
        self._check_code(code)
        return self.seen_pattern(code.pattern)

    def seen_pattern(self, pattern: int) -> bool:
        evidence = self.exact_evidence(pattern)
        return evidence is not None and evidence[1] > self.epsilon

    def _snap(self) -> _Snapshot:
        if self._snapshot is None:
            keys = np.fromiter(sorted(self._entries), dtype=np.uint64, count=len(self._entries))
            weights = np.empty(keys.size)
            sums = np.empty((keys.size, self.R))
            for n, key in enumerate(keys.tolist()):
                entry = self._entries[key]
                factor = self._decay(entry.stamp)
                weights[n] = entry.weight * factor
                sums[n] = entry.sums * factor
            self._snapshot = _Snapshot(keys, weights, sums)
        return self._snapshot

    def retrieve_raw(self, code: DendriticCode, mask: int = 0) -> tuple[NDArray[np.float64], float]:
        self._check_code(code)
        self._check_mask(mask)
        snap = self._snap()
        full = (1 << self.m) - 1
        kept = np.uint64(full & ~mask)
        matches = ((snap.keys ^ np.uint64(code.pattern)) & kept) == 0
        scale = math.ldexp(1.0, self.m - mask.bit_count() - 2)
        return scale * snap.sums[matches].sum(axis=0), scale * float(snap.weights[matches].sum())

    def tier_evidence(self, code: DendriticCode, max_tier: int) -> list[tuple[NDArray[np.float64], float]]:
        self._check_code(code)
        snap = self._snap()
        distance = np.bitwise_count(snap.keys ^ np.uint64(code.pattern)).astype(np.int64)
        evidence = []
        for k in range(max_tier + 1):
            coefficients = shell_coefficients(self.m, k)[distance]
            scale = tier_scale(self.m, k)
            evidence.append((scale * (coefficients @ snap.sums), scale * float(coefficients @ snap.weights)))
        return evidence

    def _gather(self, snap: _Snapshot, wanted: NDArray[np.uint64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        if self.m <= DENSE_LOOKUP_BITS:
            if snap.weight_table is None or snap.sums_table is None:
                snap.weight_table = np.zeros(1 << self.m)
                snap.sums_table = np.zeros((1 << self.m, self.R))
                snap.weight_table[snap.keys] = snap.weights
                snap.sums_table[snap.keys] = snap.sums
            return snap.weight_table[wanted], snap.sums_table[wanted]
        if snap.keys.size == 0:
            return np.zeros(wanted.shape), np.zeros((*wanted.shape, self.R))
        index = np.clip(np.searchsorted(snap.keys, wanted), 0, snap.keys.size - 1)
        found = snap.keys[index] == wanted
        return np.where(found, snap.weights[index], 0.0), np.where(found[..., None], snap.sums[index], 0.0)

    def retrieve_generalized_batch(
        self,
        patterns: NDArray[np.uint64],
        max_tier: int,
        mode: Generalization = "tiered",
        tier_weights: list[float] | None = None,
        chunk_size: int = 1024,
    ) -> BatchRetrieval:
        """Vectorised generalized retrieval.

        Evidence is first summed over Hamming shells around each query (all
        stored patterns at distance h), then every tier k adds shell h with
        the number of size-k masks that cover a distance-h difference.
        """
        check_tier_depth(self.m, max_tier)
        queries = np.asarray(patterns, dtype=np.uint64)
        snap = self._snap()
        shells = [shell_offsets(self.m, h) for h in range(max_tier + 1)]
        shell_w = np.zeros((max_tier + 1, queries.size))
        shell_s = np.zeros((max_tier + 1, queries.size, self.R))
        for start in range(0, queries.size, chunk_size):
            block = queries[start : start + chunk_size, None]
            for h, offsets in enumerate(shells):
                weights, sums = self._gather(snap, block ^ offsets[None, :])
                shell_w[h, start : start + block.shape[0]] = weights.sum(axis=1)
                shell_s[h, start : start + block.shape[0]] = sums.sum(axis=1)

        c_tiers = np.zeros_like(shell_w)
        d_tiers = np.zeros_like(shell_s)
        for k in range(max_tier + 1):
            scale = tier_scale(self.m, k)
            for h in range(k + 1):
                factor = scale * math.comb(self.m - h, k - h)
                c_tiers[k] += factor * shell_w[h]
                d_tiers[k] += factor * shell_s[h]
        return self._combine(d_tiers, c_tiers, mode, tier_weights)

    def release_lookup_tables(self) -> None:
        """Drop the dense lookup tables built for batched retrieval."""
        if self._snapshot is not None:
            self._snapshot.weight_table = None
            self._snapshot.sums_table = None

    def pattern_evidence(self) -> tuple[NDArray[np.uint64], NDArray[np.float64], NDArray[np.float64]]:
        snap = self._snap()
        scale = tier_scale(self.m, 0)
        return snap.keys.copy(), scale * snap.weights, scale * snap.sums

    def state_arrays(self) -> dict[str, NDArray]:
        keys = sorted(self._entries)
        return {
            "keys": np.array(keys, dtype=np.uint64),
            "weights": np.array([self._entries[k].weight for k in keys], dtype=np.float64),
            "sums": np.array([self._entries[k].sums for k in keys], dtype=np.float64).reshape(len(keys), self.R),
            "stamps": np.array([self._entries[k].stamp for k in keys], dtype=np.int64),
        }

    def load_state_arrays(self, arrays: dict[str, NDArray]) -> None:
        keys, weights, sums, stamps = arrays["keys"], arrays["weights"], arrays["sums"], arrays["stamps"]
        if not (keys.shape[0] == weights.shape[0] == sums.shape[0] == stamps.shape[0]) or sums.shape[1:] != (self.R,):
            raise DimensionError("Count state arrays do not match the memory dimensions")
        self._entries = {
            int(k): _Entry(float(w), np.array(s, dtype=np.float64), int(t))
            for k, w, s, t in zip(keys.tolist(), weights, sums, stamps.tolist(), strict=True)
        }
        self._snapshot = None


MEMORY_KINDS: dict[str, type[SynapticMemory]] = {"dense": DenseMemory, "count": CountMemory}


def create_memory(kind: MemoryKind, m: int, R: int, params: LearningParams | None = None) -> SynapticMemory:
    """Build an empty memory of the requested realisation."""
    try:
        memory_cls = MEMORY_KINDS[kind]
    except KeyError as e:
        raise ConfigurationError(f"Unknown memory kind '{kind}'. Supported: {', '.join(MEMORY_KINDS)}") from e
    logger.debug(f"Creating {kind} memory with m={m}, R={R}")
    return memory_cls(m, R, params)


__all__ = [
    "BatchRetrieval",
    "CountMemory",
    "DenseMemory",
    "MaskTier",
    "RetrievalResult",
    "SynapticMemory",
    "create_memory",
    "make_mask_tiers",
    "mask_from_positions",
]
