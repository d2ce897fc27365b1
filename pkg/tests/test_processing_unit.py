"""Tests for processing units."""

import numpy as np
import pytest

from src.low_order_model.config import CapacityError, DimensionError
from src.low_order_model.core.dendritic_code import BinaryVector
from src.low_order_model.core.processing_unit import ProcessingUnit, PUConfig


def bv(text: str) -> BinaryVector:
    return BinaryVector.from_string(text)


class TestPUConfig:
    """Test cases for unit configuration."""

    def test_tier_depth_checked(self):
        with pytest.raises(CapacityError):
            PUConfig(m=3, R=1, max_tier=2)

    def test_defaults(self):
        config = PUConfig(m=4, R=2)
        assert config.learn_policy == "always"
        assert config.mode == "supervised"
        assert config.memory == "count"


class TestSupervisedUnit:
    """Test cases for a supervised unit."""

    @pytest.mark.parametrize("memory", ["count", "dense"])
    def test_learn_then_retrieve(self, memory):
        unit = ProcessingUnit(PUConfig(m=3, R=2, memory=memory))
        assert unit.learn_supervised(bv("101"), bv("10"))
        output = unit.retrieve(bv("101"))
        np.testing.assert_allclose(output.p, [1.0, 0.0])
        assert output.estimate == bv("10")
        assert output.tier_used == 0

    def test_unlearned_input_is_one_half(self):
        unit = ProcessingUnit(PUConfig(m=3, R=2))
        unit.learn_supervised(bv("101"), bv("10"))
        output = unit.retrieve(bv("010"))
        np.testing.assert_array_equal(output.p, [0.5, 0.5])
        assert output.tier_used is None

    def test_generalizes_to_one_bit_corruption(self):
        unit = ProcessingUnit(PUConfig(m=4, R=1, max_tier=1))
        unit.learn_supervised(bv("1100"), bv("1"))
        output = unit.retrieve(bv("1101"))
        assert output.tier_used == 1
        np.testing.assert_allclose(output.p, [1.0])

    def test_if_unseen_policy_learns_once(self):
        unit = ProcessingUnit(PUConfig(m=3, R=1, learn_policy="if_unseen"))
        assert unit.learn_supervised(bv("011"), bv("1"))
        assert not unit.learn_supervised(bv("011"), bv("0"))
        assert unit.memory.learn_count == 1
        np.testing.assert_allclose(unit.retrieve(bv("011")).p, [1.0])

    def test_always_policy_accumulates(self):
        unit = ProcessingUnit(PUConfig(m=3, R=1))
        unit.learn_supervised(bv("011"), bv("1"))
        unit.learn_supervised(bv("011"), bv("0"))
        np.testing.assert_allclose(unit.retrieve(bv("011")).p, [0.5])

    def test_dimension_errors(self):
        unit = ProcessingUnit(PUConfig(m=3, R=2))
        with pytest.raises(DimensionError):
            unit.retrieve(bv("10"))
        with pytest.raises(DimensionError):
            unit.learn_supervised(bv("101"), bv("1"))

    def test_learn_requires_label_in_supervised_mode(self):
        unit = ProcessingUnit(PUConfig(m=3, R=2))
        with pytest.raises(ValueError):
            unit.learn(bv("101"))

    def test_retrieve_does_not_touch_memory(self):
        unit = ProcessingUnit(PUConfig(m=3, R=2))
        unit.learn_supervised(bv("101"), bv("10"))
        before = {k: v.copy() for k, v in unit.memory.state_arrays().items()}
        unit.retrieve(bv("111"))
        for name, array in unit.memory.state_arrays().items():
            np.testing.assert_array_equal(array, before[name])

    def test_recall_pattern(self):
        unit = ProcessingUnit(PUConfig(m=4, R=4))
        unit.learn_pattern_supervised(bv("1001").pattern, np.array([1.0, 0.0, 0.0, 1.0]))
        assert unit.recall_pattern(bv("1001").pattern).tolist() == [1, 0, 0, 1]
        assert unit.recall_pattern(bv("1000").pattern) is None
        assert unit.rng.position == 0


class TestUnsupervisedUnit:
    """Test cases for a unit that labels inputs with its own estimates."""

    def test_coined_label_is_reproduced(self):
        unit = ProcessingUnit(PUConfig(m=4, R=6, mode="unsupervised"), seed=5)
        first = unit.learn_unsupervised(bv("1010"))
        assert first.tier_used is None
        again = unit.retrieve(bv("1010"))
        assert again.estimate == first.estimate
        np.testing.assert_array_equal(again.p, first.estimate.bits.astype(float))

    def test_learn_dispatches_on_mode(self):
        unit = ProcessingUnit(PUConfig(m=3, R=2, mode="unsupervised"))
        assert unit.learn(bv("110"))
        assert unit.memory.learn_count == 1

    def test_deterministic_given_seed(self):
        outputs = []
        for _ in range(2):
            unit = ProcessingUnit(PUConfig(m=5, R=8, mode="unsupervised", pu_id="u"), seed=99)
            outputs.append([unit.learn_unsupervised(bv(s)).estimate.to_string() for s in ("10101", "00000", "11111")])
        assert outputs[0] == outputs[1]


class TestStats:
    """Test cases for unit statistics."""

    def test_empty_unit(self):
        stats = ProcessingUnit(PUConfig(m=3, R=2)).stats()
        assert stats == {"patterns": 0, "mean_entropy": 0.0, "learn_count": 0}

    def test_entropy(self):
        unit = ProcessingUnit(PUConfig(m=3, R=2))
        unit.learn_supervised(bv("100"), bv("11"))
        unit.learn_supervised(bv("010"), bv("10"))
        unit.learn_supervised(bv("010"), bv("11"))
        stats = unit.stats()
        assert stats["patterns"] == 2
        assert stats["learn_count"] == 3
        # pattern 100 is certain (0 bits); pattern 010 has one fair bit (1 bit)
        assert stats["mean_entropy"] == pytest.approx(0.5)
