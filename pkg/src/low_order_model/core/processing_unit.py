"""
Processing units: encoder, synaptic memory and somas assembled into one unit.

A supervised unit (SPU) learns inputs with labels supplied from outside; an
unsupervised unit (UPU) learns each input with its own spiked estimate, so an
input it has never seen is given a fresh random label that later retrievals
reproduce.
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import DimensionError
from ..models.config import Decode, Generalization, LearningParams, LearnMode, LearnPolicy, MemoryKind
from .dendritic_code import BinaryVector, DendriticCode, encode
from .soma import SpikeRng, decode, probability, spike
from .synaptic_memory import RetrievalResult, SynapticMemory, check_tier_depth, create_memory


class PUConfig(BaseModel):
    """Static description of one processing unit."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    m: int = Field(ge=1)
    R: int = Field(ge=1)
    params: LearningParams = Field(default_factory=LearningParams)
    max_tier: int = Field(0, ge=0)
    learn_policy: LearnPolicy = "always"
    mode: LearnMode = "supervised"
    pu_id: str = "pu:0"
    memory: MemoryKind = "count"
    generalization: Generalization = "tiered"
    tier_weights: list[float] | None = None

    @model_validator(mode="after")
    def validate_tier_depth(self) -> "PUConfig":
        check_tier_depth(self.m, self.max_tier)
        return self


@dataclass(frozen=True)
class PUOutput:
    """Everything a retrieval produces: the distribution, a point estimate and the tier that answered."""

    p: NDArray[np.float64]
    estimate: BinaryVector
    tier_used: int | None


class ProcessingUnit:
    """One unit of mutable state: a memory plus its private spike stream.

    Calls on one unit must be serialized; distinct units are independent.
    """

    def __init__(self, config: PUConfig, seed: int = 0, rng: SpikeRng | None = None):
        self.config = config
        self.memory: SynapticMemory = create_memory(config.memory, config.m, config.R, config.params)
        self.rng = rng or SpikeRng(seed, config.pu_id)

    @property
    def pu_id(self) -> str:
        return self.config.pu_id

    def _code(self, v: BinaryVector) -> DendriticCode:
        if len(v) != self.config.m:
            raise DimensionError(f"{self.pu_id} expects {self.config.m} input bits, got {len(v)}")
        return encode(v)

    def _label(self, r: BinaryVector) -> NDArray[np.float64]:
        if len(r) != self.config.R:
            raise DimensionError(f"{self.pu_id} expects {self.config.R} label bits, got {len(r)}")
        return r.bits.astype(np.float64)

    def retrieve_result(self, v: BinaryVector) -> RetrievalResult:
        """Graded (d, c) evidence for an input, without spiking."""
        return self.memory.retrieve_generalized(
            self._code(v), self.config.max_tier, self.config.generalization, self.config.tier_weights
        )

    def retrieve(self, v: BinaryVector) -> PUOutput:
        """Encode, retrieve with generalization, estimate probabilities and spike.

        Never touches the memory; only the spike stream advances.
        """
        result = self.retrieve_result(v)
        p = probability(result, self.memory.epsilon)
        return PUOutput(p=p, estimate=spike(p, self.rng), tier_used=result.tier_used)

    def learn_supervised(self, v: BinaryVector, r: BinaryVector) -> bool:
        """Learn ``v`` with an external label; returns whether the memory changed."""
        code = self._code(v)
        return self.learn_pattern_supervised(code.pattern, self._label(r))

    def learn_pattern_supervised(self, pattern: int, label: NDArray[np.float64]) -> bool:
        """Integer-pattern form of ``learn_supervised`` used on hot paths."""
        if self.config.learn_policy == "if_unseen" and self.memory.seen_pattern(pattern):
            return False
        self.memory.learn_pattern(pattern, label)
        return True

    def learn_unsupervised(self, v: BinaryVector) -> PUOutput:
        """Learn ``v`` with the unit's own spiked estimate as its label."""
        output = self.retrieve(v)
        if output.tier_used is None:
            logger.debug(f"{self.pu_id} coined label {output.estimate.to_string()} for an unlearned input")
        self.memory.learn(self._code(v), output.estimate.bits.astype(np.float64))
        return output

    def learn(self, v: BinaryVector, r: BinaryVector | None = None) -> bool:
        """Learn according to the configured mode."""
        if self.config.mode == "unsupervised":
            self.learn_unsupervised(v)
            return True
        if r is None:
            raise ValueError(f"{self.pu_id} is supervised and needs a label")
        return self.learn_supervised(v, r)

    def recall_pattern(self, pattern: int, mode: Decode = "max_probability") -> NDArray[np.uint8] | None:
        """Decoded label of an exactly stored pattern, or None if it was never learned."""
        evidence = self.memory.exact_evidence(pattern)
        if evidence is None:
            return None
        d, c = evidence
        p = probability(RetrievalResult(d, c, 0), self.memory.epsilon)
        return decode(p, self.rng, mode)

    def stats(self) -> dict[str, float]:
        """Stored pattern count, mean label entropy (bits) and learn count."""
        keys, c, d = self.memory.pattern_evidence()
        if keys.size == 0:
            return {"patterns": 0, "mean_entropy": 0.0, "learn_count": self.memory.learn_count}
        p = np.clip((d / c[:, None] + 1.0) / 2.0, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
        entropy = np.nan_to_num(terms).sum(axis=1)
        return {
            "patterns": int(keys.size),
            "mean_entropy": float(entropy.mean()),
            "learn_count": self.memory.learn_count,
        }
