"""
Layered network of processing units for digit recognition.

Layer 1 is a grid of supervised units, each reading one 16-bit window of the
image and labelling it with the digit's 4-bit code. Layer 2 is a coarser grid;
each of its units reads the concatenated outputs of one block of layer-1 units
and learns the digit's one-hot code. Their probability vectors are the
network's output and are combined by thresholded voting.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from loguru import logger
from numpy.typing import NDArray

from ..config import DimensionError
from ..models.config import LayerConfig, RunConfig
from .dendritic_code import BinaryVector
from .labels import bits_to_int, label_table
from .processing_unit import ProcessingUnit, PUConfig
from .soma import SpikeRng, decode, probability, probability_batch

Windows = Sequence[BinaryVector] | NDArray[np.uint64] | Sequence[int]


class StreamBank:
    """Lazily created spike streams, one per processing unit, under a common prefix."""

    def __init__(self, seed: int, prefix: str):
        self.seed = seed
        self.prefix = prefix
        self._streams: dict[str, SpikeRng] = {}

    def __getitem__(self, pu_id: str) -> SpikeRng:
        stream = self._streams.get(pu_id)
        if stream is None:
            stream = self._streams[pu_id] = SpikeRng(self.seed, f"{self.prefix}/{pu_id}")
        return stream


@dataclass
class NetworkTopology:
    """Both unit grids (row-major) and the block wiring between them."""

    layer1: list[ProcessingUnit]
    layer2: list[ProcessingUnit]
    layer1_shape: tuple[int, int]
    layer2_shape: tuple[int, int]
    wiring: NDArray[np.int64]
    vote_threshold: float

    def feeders(self, row: int, col: int) -> list[tuple[int, int]]:
        """Layer-1 grid positions read by the layer-2 unit at (row, col), in concatenation order."""
        cols = self.layer1_shape[1]
        return [divmod(int(index), cols) for index in self.wiring[row * self.layer2_shape[1] + col]]


@dataclass(frozen=True)
class Prediction:
    """Voting outcome for one image."""

    digit: int
    vote_sum: NDArray[np.float64]
    voters: int
    fallback: bool = False


@dataclass
class EvaluationResult:
    """Error rate of a labelled image set with voting diagnostics."""

    error_rate: float
    images: int
    fallback_count: int
    mean_voters: float
    predictions: NDArray[np.int64] = field(repr=False)


def _layer_units(layer: LayerConfig, name: str, cfg: RunConfig) -> list[ProcessingUnit]:
    units = []
    for row in range(layer.rows):
        for col in range(layer.cols):
            config = PUConfig(
                m=layer.input_bits,
                R=layer.label_bits,
                params=cfg.learning,
                max_tier=layer.max_tier,
                learn_policy=layer.learn_policy,
                mode="supervised",
                pu_id=f"{name}:{row}:{col}",
                memory=layer.memory,
                generalization=cfg.generalization,
                tier_weights=cfg.tier_weights,
            )
            units.append(ProcessingUnit(config, seed=cfg.seed))
    return units


def build_topology(cfg: RunConfig) -> NetworkTopology:
    """Create both grids with unique row-major ids and the block wiring."""
    layer1 = _layer_units(cfg.layer1, "l1", cfg)
    layer2 = _layer_units(cfg.layer2, "l2", cfg)
    b = cfg.block
    wiring = np.array(
        [
            [(row * b + dr) * cfg.layer1.cols + (col * b + dc) for dr in range(b) for dc in range(b)]
            for row in range(cfg.layer2.rows)
            for col in range(cfg.layer2.cols)
        ],
        dtype=np.int64,
    )
    logger.debug(f"Built topology: {len(layer1)} layer-1 units, {len(layer2)} layer-2 units, block {b}x{b}")
    return NetworkTopology(
        layer1=layer1,
        layer2=layer2,
        layer1_shape=(cfg.layer1.rows, cfg.layer1.cols),
        layer2_shape=(cfg.layer2.rows, cfg.layer2.cols),
        wiring=wiring,
        vote_threshold=cfg.vote_threshold,
    )


def vote(p: NDArray[np.float64], threshold: float) -> Prediction:
    """Sum the confident probability vectors and pick the strongest digit.

    A vector votes when its largest entry is strictly above ``threshold``. If
    none does, every vector is summed. Ties go to the smaller digit.
    """
    confident = p.max(axis=1) > threshold
    voters = int(confident.sum())
    fallback = voters == 0
    vote_sum = p.sum(axis=0) if fallback else p[confident].sum(axis=0)
    return Prediction(digit=int(np.argmax(vote_sum)), vote_sum=vote_sum, voters=voters, fallback=fallback)


class Network:
    """Two-layer network built from a run configuration."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.topology = build_topology(cfg)
        self.examples_seen = 0
        # pattern -> packed output bits of layer-1 units whose stored label can no longer change
        self._recall_cache: list[dict[int, int]] = [{} for _ in self.topology.layer1]
        self._cache_recalls = (
            cfg.layer1.learn_policy == "if_unseen"
            and cfg.decode == "max_probability"
            and cfg.learning.forgetting == 1.0
        )

    @property
    def layer1(self) -> list[ProcessingUnit]:
        return self.topology.layer1

    @property
    def layer2(self) -> list[ProcessingUnit]:
        return self.topology.layer2

    @property
    def units(self) -> list[ProcessingUnit]:
        return self.topology.layer1 + self.topology.layer2

    def _patterns(self, windows: Windows) -> list[int]:
        if len(windows) != len(self.layer1):
            raise DimensionError(f"Expected {len(self.layer1)} windows, got {len(windows)}")
        patterns = []
        for window in windows:
            if isinstance(window, BinaryVector):
                if len(window) != self.cfg.layer1.input_bits:
                    raise DimensionError(f"Windows must have {self.cfg.layer1.input_bits} bits, got {len(window)}")
                patterns.append(window.pattern)
            else:
                pattern = int(window)
                if pattern < 0 or pattern >> self.cfg.layer1.input_bits:
                    raise DimensionError(f"Window pattern {pattern} does not fit in {self.cfg.layer1.input_bits} bits")
                patterns.append(pattern)
        return patterns

    def _layer2_pattern(self, codes: Sequence[int], unit: int) -> int:
        width = self.cfg.layer1.label_bits
        return sum(codes[int(source)] << (width * q) for q, source in enumerate(self.topology.wiring[unit]))

    def _layer2_patterns(self, codes: NDArray[np.uint64]) -> NDArray[np.uint64]:
        width = np.uint64(self.cfg.layer1.label_bits)
        patterns = np.zeros((codes.shape[0], len(self.layer2)), dtype=np.uint64)
        for q in range(self.topology.wiring.shape[1]):
            patterns |= codes[:, self.topology.wiring[:, q]] << (width * np.uint64(q))
        return patterns

    def _stream(self, unit: ProcessingUnit, streams: StreamBank | None) -> SpikeRng:
        return unit.rng if streams is None else streams[unit.pu_id]

    def _retrieve_pattern(self, unit: ProcessingUnit, pattern: int) -> NDArray[np.float64]:
        result = unit.retrieve_result(BinaryVector.from_pattern(pattern, unit.config.m))
        return probability(result, unit.memory.epsilon)

    def forward(
        self, windows: Windows, streams: StreamBank | None = None
    ) -> tuple[list[NDArray[np.uint8]], NDArray[np.float64]]:
        """Layer-1 decoded outputs and layer-2 probability vectors for one image.

        Memories are left untouched; spike draws come from ``streams`` or, when
        omitted, from each unit's own stream.
        """
        patterns = self._patterns(windows)
        outputs = [
            decode(self._retrieve_pattern(unit, pattern), self._stream(unit, streams), self.cfg.decode)
            for unit, pattern in zip(self.layer1, patterns, strict=True)
        ]
        codes = [bits_to_int(bits) for bits in outputs]
        p2 = np.empty((len(self.layer2), self.cfg.layer2.label_bits))
        for index, unit in enumerate(self.layer2):
            p2[index] = self._retrieve_pattern(unit, self._layer2_pattern(codes, index))
        return outputs, p2

    def predict(self, windows: Windows, streams: StreamBank | None = None) -> Prediction:
        _, p2 = self.forward(windows, streams)
        prediction = vote(p2, self.topology.vote_threshold)
        if prediction.fallback:
            logger.debug("No layer-2 vector passed the vote threshold; summed all vectors")
        return prediction

    def _layer1_code(self, index: int, pattern: int, label: NDArray[np.float64]) -> tuple[int, bool]:
        cache = self._recall_cache[index]
        code = cache.get(pattern)
        if code is not None:
            return code, False
        unit = self.layer1[index]
        learned = unit.learn_pattern_supervised(pattern, label)
        bits = unit.recall_pattern(pattern, self.cfg.decode)
        if bits is None:
            # stored evidence decayed below epsilon
            bits = decode(self._retrieve_pattern(unit, pattern), unit.rng, self.cfg.decode)
        code = bits_to_int(bits)
        if self._cache_recalls:
            cache[pattern] = code
        return code, learned

    def train_example(self, windows: Windows, digit: int) -> int:
        """Learn one labelled image online; returns how many layer-1 units stored a new pattern."""
        if not 0 <= digit <= 9:
            raise ValueError(f"Digit must be in 0..9, got {digit}")
        patterns = self._patterns(windows)
        binary = label_table("binary")[digit]
        onehot = label_table("onehot")[digit]
        codes = []
        learned = 0
        for index, pattern in enumerate(patterns):
            code, stored = self._layer1_code(index, pattern, binary)
            codes.append(code)
            learned += stored
        for index, unit in enumerate(self.layer2):
            unit.learn_pattern_supervised(self._layer2_pattern(codes, index), onehot)
        self.examples_seen += 1
        return learned

    def reset_recall_cache(self) -> None:
        """Forget cached layer-1 recalls, e.g. after memories were replaced from a checkpoint."""
        self._recall_cache = [{} for _ in self.layer1]

    def evaluate(
        self,
        patterns: NDArray[np.uint64],
        labels: NDArray[np.uint8],
        seed: int | None = None,
        batch_size: int | None = None,
    ) -> EvaluationResult:
        """Predict every image of a window-pattern matrix (images x layer-1 units) and score it.

        Spikes come from fresh ``eval`` streams, so the result depends only on
        the learned state and the seed and matches ``predict`` called image by
        image with ``StreamBank(seed, "eval")``.
        """
        patterns = np.asarray(patterns, dtype=np.uint64)
        if patterns.ndim != 2 or patterns.shape[1] != len(self.layer1):
            raise DimensionError(f"Expected an (images, {len(self.layer1)}) pattern matrix, got {patterns.shape}")
        if labels.shape[0] != patterns.shape[0]:
            raise DimensionError(f"{patterns.shape[0]} images but {labels.shape[0]} labels")
        streams = StreamBank(self.cfg.seed if seed is None else seed, "eval")
        chunk = batch_size or self.cfg.protocol.eval_batch_size
        n = patterns.shape[0]

        codes = np.empty(patterns.shape, dtype=np.uint64)
        for index, unit in enumerate(self.layer1):
            bits = self._decode_batch(unit, patterns[:, index], streams[unit.pu_id], chunk)
            codes[:, index] = (bits.astype(np.uint64) << np.arange(bits.shape[1], dtype=np.uint64)).sum(axis=1)

        inputs = self._layer2_patterns(codes)
        labels_out = self.cfg.layer2.label_bits
        confident_sum = np.zeros((n, labels_out))
        total_sum = np.zeros((n, labels_out))
        voters = np.zeros(n, dtype=np.int64)
        for index, unit in enumerate(self.layer2):
            p = self._probability_batch(unit, inputs[:, index], chunk)
            confident = p.max(axis=1) > self.topology.vote_threshold
            confident_sum += np.where(confident[:, None], p, 0.0)
            total_sum += p
            voters += confident

        fallback = voters == 0
        vote_sum = np.where(fallback[:, None], total_sum, confident_sum)
        predictions = vote_sum.argmax(axis=1).astype(np.int64)
        error_rate = float(np.mean(predictions != labels)) if n else 0.0
        fallback_count = int(fallback.sum())
        if fallback_count:
            logger.warning(f"{fallback_count} of {n} images had no confident layer-2 vote; summed all vectors")
        return EvaluationResult(
            error_rate=error_rate,
            images=n,
            fallback_count=fallback_count,
            mean_voters=float(voters.mean()) if n else 0.0,
            predictions=predictions,
        )

    def _probability_batch(self, unit: ProcessingUnit, queries: NDArray[np.uint64], chunk: int) -> NDArray[np.float64]:
        try:
            batch = unit.memory.retrieve_generalized_batch(
                queries, unit.config.max_tier, unit.config.generalization, unit.config.tier_weights, chunk_size=chunk
            )
            return probability_batch(batch, unit.memory.epsilon)
        finally:
            release = getattr(unit.memory, "release_lookup_tables", None)
            if release is not None:
                release()

    def _decode_batch(
        self, unit: ProcessingUnit, queries: NDArray[np.uint64], stream: SpikeRng, chunk: int
    ) -> NDArray[np.uint8]:
        return decode(self._probability_batch(unit, queries, chunk), stream, self.cfg.decode)

    def stats(self) -> list[dict[str, float | str]]:
        """Per-unit storage statistics, layer 1 first."""
        return [{"pu_id": unit.pu_id, **unit.stats()} for unit in self.units]
