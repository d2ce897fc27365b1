"""Tests for soma probabilities, spiking and decoding."""

import hashlib

import numpy as np
import pytest

from src.low_order_model.core.dendritic_code import BinaryVector
from src.low_order_model.core.soma import (
    SpikeRng,
    decode,
    from_bipolar,
    probability,
    probability_batch,
    spike,
    spike_bits,
    stream_key,
    to_bipolar,
)
from src.low_order_model.core.synaptic_memory import BatchRetrieval, CountMemory, RetrievalResult

# First draws of SpikeRng(42, "pu:0"), as integers k with u = k / 2^53
GOLDEN_PU0_DRAWS = [
    6054013816803812,
    8983486520384641,
    4300652080490982,
    6115888134858031,
    117078620804822,
    8934204294386192,
    8588076199031210,
    2429654769232099,
]


def reference_generator(seed: int, stream: str) -> np.random.Generator:
    digest = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
    key = (int.from_bytes(digest, "little") << 64) | seed
    return np.random.Generator(np.random.Philox(key=key))


class TestProbability:
    """Test cases for the probability formula."""

    def test_examples(self):
        result = RetrievalResult(np.array([2.0, -2.0, 0.0, 1.0]), 2.0, 0)
        np.testing.assert_allclose(probability(result), [1.0, 0.0, 0.5, 0.75])

    def test_unlearned_is_one_half(self):
        result = RetrievalResult(np.array([0.0, 0.0]), 0.0, None)
        np.testing.assert_array_equal(probability(result), [0.5, 0.5])

    def test_clamps_out_of_range_ratios(self):
        result = RetrievalResult(np.array([3.0, -3.0]), 2.0, 0)
        np.testing.assert_array_equal(probability(result), [1.0, 0.0])

    def test_clamping_logs_a_warning(self, mocker):
        mock_logger = mocker.patch("src.low_order_model.core.soma.logger")
        probability(RetrievalResult(np.array([3.0, 1.0]), 2.0, 0))
        mock_logger.warning.assert_called_once()

    def test_batch_clamping_logs_a_warning(self, mocker):
        mock_logger = mocker.patch("src.low_order_model.core.soma.logger")
        batch = BatchRetrieval(
            d=np.array([[1.0, 0.0], [-5.0, 0.0], [7.0, 7.0]]),
            c=np.array([2.0, 2.0, 0.0]),
            tier_used=np.array([0, 0, -1]),
        )
        p = probability_batch(batch)
        np.testing.assert_array_equal(p, [[0.75, 0.5], [0.0, 0.5], [0.5, 0.5]])
        mock_logger.warning.assert_called_once()
        assert "1 of 3 rows" in mock_logger.warning.call_args.args[0]

    def test_batch_within_bounds_is_silent(self, mocker):
        mock_logger = mocker.patch("src.low_order_model.core.soma.logger")
        batch = BatchRetrieval(d=np.array([[2.0, -2.0]]), c=np.array([2.0]), tier_used=np.array([0]))
        probability_batch(batch)
        mock_logger.warning.assert_not_called()

    def test_batch_matches_rows(self):
        batch = BatchRetrieval(
            d=np.array([[2.0, 0.0], [0.0, 0.0], [-1.0, 1.0]]),
            c=np.array([2.0, 0.0, 4.0]),
            tier_used=np.array([0, -1, 1]),
        )
        p = probability_batch(batch)
        for index in range(len(batch)):
            np.testing.assert_allclose(p[index], probability(batch.row(index)))

    def test_bounds_under_random_learning(self):
        rng = np.random.default_rng(8)
        for _ in range(200):
            m = int(rng.integers(2, 7))
            R = int(rng.integers(1, 5))
            memory = CountMemory(m, R)
            for _ in range(int(rng.integers(0, 15))):
                memory.learn_pattern(int(rng.integers(0, 2**m)), rng.integers(0, 2, size=R).astype(float))
            queries = np.arange(2**m, dtype=np.uint64)
            batch = memory.retrieve_generalized_batch(queries, min(2, m - 2))
            assert np.all(np.abs(batch.d) <= batch.c[:, None] + 1e-9)
            p = probability_batch(batch)
            assert np.all((p >= 0.0) & (p <= 1.0))


class TestSpikeRng:
    """Test cases for reproducible spike streams."""

    def test_matches_reference_philox(self):
        rng = SpikeRng(42, "l1:0:0")
        np.testing.assert_array_equal(rng.uniform(10), reference_generator(42, "l1:0:0").random(10))

    def test_golden_stream(self):
        assert stream_key(42, "pu:0") == (0x72737A488D68F1E0 << 64) | 42
        draws = SpikeRng(42, "pu:0").uniform(8)
        assert (draws * 2.0**53).astype(np.int64).tolist() == GOLDEN_PU0_DRAWS
        bits = spike_bits(np.full(8, 0.5), SpikeRng(42, "pu:0"))
        assert bits.tolist() == [0, 0, 1, 0, 1, 0, 0, 1]

    def test_streams_are_independent(self):
        assert not np.array_equal(SpikeRng(1, "a").uniform(5), SpikeRng(1, "b").uniform(5))
        assert not np.array_equal(SpikeRng(1, "a").uniform(5), SpikeRng(2, "a").uniform(5))

    def test_position_counts_draws(self):
        rng = SpikeRng(3, "x")
        rng.uniform(4)
        rng.uniform((2, 3))
        assert rng.position == 10

    def test_restore_from_position(self):
        rng = SpikeRng(3, "x")
        rng.uniform(7)
        expected = rng.uniform(5)
        np.testing.assert_array_equal(SpikeRng(3, "x", position=7).uniform(5), expected)

    def test_cannot_rewind(self):
        with pytest.raises(ValueError):
            SpikeRng(0, "x").skip(-1)


class TestSpike:
    """Test cases for spiking and decoding."""

    @pytest.mark.parametrize("p", [0.1, 0.5, 0.9])
    def test_frequency_within_three_sigma(self, p):
        n = 100_000
        rng = SpikeRng(2019, f"stats:{p}")
        ones = int(spike_bits(np.full(n, p), rng).sum())
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(ones - n * p) <= 3 * sigma

    def test_degenerate_probabilities_are_deterministic(self):
        rng = SpikeRng(0, "x")
        assert spike(np.array([1.0, 0.0, 1.0]), rng) == BinaryVector([1, 0, 1])

    def test_same_seed_same_spikes(self):
        p = np.array([0.3, 0.6, 0.5, 0.9])
        first = [spike(p, SpikeRng(5, "u")).to_string() for _ in range(3)]
        assert len(set(first)) == 1

    def test_max_probability_draws_only_for_ties(self):
        rng = SpikeRng(9, "d")
        bits = decode(np.array([0.9, 0.2, 0.51, 0.49]), rng)
        assert bits.tolist() == [1, 0, 1, 0]
        assert rng.position == 0
        decode(np.array([[0.5, 0.7], [0.5, 0.5]]), rng)
        assert rng.position == 3

    def test_tie_draws_follow_row_major_order(self):
        p = np.array([[0.5, 0.9], [0.5, 0.5]])
        batch = decode(p, SpikeRng(4, "t"))
        rng = SpikeRng(4, "t")
        rows = [decode(row, rng) for row in p]
        np.testing.assert_array_equal(batch, np.stack(rows))

    def test_spike_mode_draws_every_bit(self):
        rng = SpikeRng(1, "s")
        decode(np.array([1.0, 0.0, 0.3]), rng, mode="spike")
        assert rng.position == 3


class TestBipolar:
    """Test cases for the +1/-1 presentation."""

    def test_round_trip(self):
        v = BinaryVector([1, 0, 0, 1])
        assert to_bipolar(v).tolist() == [1, -1, -1, 1]
        assert from_bipolar(to_bipolar(v)) == v

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            from_bipolar([1, 0, -1])
