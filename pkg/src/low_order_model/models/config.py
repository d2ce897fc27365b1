"""Run configuration models.

Every default reproduces the real-time MNIST experiment: a 22x22 grid of
16-bit first-layer units with 4-bit labels feeding an 11x11 grid of 16-bit
second-layer units with one-hot labels, 30 bins of 2000 training images.
"""

import hashlib
import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

LearnPolicy = Literal["always", "if_unseen"]
LearnMode = Literal["supervised", "unsupervised"]
Generalization = Literal["tiered", "weighted"]
Decode = Literal["max_probability", "spike"]
MemoryKind = Literal["count", "dense"]

DEFAULT_SELECTION: list[tuple[int, int]] = [(r, c) for r in (0, 2, 4, 6) for c in (0, 2, 4, 6)]


class LearningParams(BaseModel):
    """Constants of the covariance and accumulation rules."""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    forgetting: float = Field(1.0, gt=0.0, le=1.0, alias="lambda")
    scale: float = Field(2.0, gt=0.0, alias="Lambda")
    u_center: float = 0.5
    v_center: float = 0.5
    centering: Literal["fixed", "running"] = "fixed"


class LayerConfig(BaseModel):
    """One grid of processing units."""

    model_config = ConfigDict(extra="forbid")

    rows: int = Field(22, ge=1)
    cols: int = Field(22, ge=1)
    input_bits: int = Field(16, ge=1, le=30)
    label_bits: int = Field(4, ge=1)
    max_tier: int = Field(2, ge=0)
    learn_policy: LearnPolicy = "if_unseen"
    memory: MemoryKind = "count"

    @model_validator(mode="after")
    def validate_tier_depth(self) -> "LayerConfig":
        if self.max_tier > max(self.input_bits - 2, 0):
            raise ValueError(f"max_tier {self.max_tier} exceeds input_bits - 2 = {self.input_bits - 2}")
        return self

    @property
    def size(self) -> int:
        return self.rows * self.cols


class SelectionConfig(BaseModel):
    """Sliding-window geometry and the pixels read inside each window."""

    model_config = ConfigDict(extra="forbid")

    window: int = Field(8, ge=1)
    padding: int = Field(1, ge=0)
    stride: int = Field(1, ge=1)
    offsets: list[tuple[int, int]] = Field(default_factory=lambda: list(DEFAULT_SELECTION))

    @model_validator(mode="after")
    def validate_offsets(self) -> "SelectionConfig":
        if len(set(self.offsets)) != len(self.offsets):
            raise ValueError("Selection offsets must be distinct")
        for row, col in self.offsets:
            if not (0 <= row < self.window and 0 <= col < self.window):
                raise ValueError(f"Offset ({row}, {col}) lies outside the {self.window}x{self.window} window")
        return self

    def grid_side(self, image_side: int = 28) -> int:
        """Number of window positions per row for a square image."""
        return (image_side + self.padding - self.window) // self.stride + 1


class DatasetConfig(BaseModel):
    """Locations of the four MNIST IDX files."""

    model_config = ConfigDict(extra="forbid")

    dir: Path = Path("./data/mnist")
    train_images: str = "train-images-idx3-ubyte"
    train_labels: str = "train-labels-idx1-ubyte"
    test_images: str = "t10k-images-idx3-ubyte"
    test_labels: str = "t10k-labels-idx1-ubyte"
    binarize_threshold: int = Field(35, ge=0, le=255)

    def path(self, name: str) -> Path:
        return self.dir / getattr(self, name)


class ProtocolConfig(BaseModel):
    """Real-time learning protocol: sequential bins with a test pass after each."""

    model_config = ConfigDict(extra="forbid")

    bins: int = Field(30, ge=1)
    bin_size: int = Field(2000, ge=1)
    test_limit: int | None = Field(None, ge=1)
    eval_batch_size: int = Field(1000, ge=1)


class RunConfig(BaseModel):
    """Complete configuration of a training/evaluation run."""

    model_config = ConfigDict(extra="forbid")

    seed: int = Field(20190810, ge=0, lt=2**64)
    output_dir: Path = Path("./runs/default")
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    layer1: LayerConfig = Field(default_factory=LayerConfig)
    layer2: LayerConfig = Field(
        default_factory=lambda: LayerConfig(rows=11, cols=11, input_bits=16, label_bits=10, learn_policy="always")
    )
    block: int = Field(2, ge=1)
    learning: LearningParams = Field(default_factory=LearningParams)
    generalization: Generalization = "tiered"
    tier_weights: list[float] | None = None
    decode: Decode = "max_probability"
    vote_threshold: float = Field(0.85, ge=0.0, le=1.0)
    protocol: ProtocolConfig = Field(default_factory=ProtocolConfig)

    @field_validator("output_dir", mode="before")
    @classmethod
    def parse_path(cls, v: str | Path) -> Path:
        """Convert string paths to Path objects."""
        if isinstance(v, str):
            return Path(v)
        return v

    @model_validator(mode="after")
    def validate_wiring(self) -> "RunConfig":
        if self.layer1.rows % self.block or self.layer1.cols % self.block:
            raise ValueError(f"Layer 1 grid is not tiled exactly by {self.block}x{self.block} blocks")
        if (self.layer2.rows, self.layer2.cols) != (self.layer1.rows // self.block, self.layer1.cols // self.block):
            raise ValueError("Layer 2 grid must have one unit per layer-1 block")
        expected_bits = self.block * self.block * self.layer1.label_bits
        if self.layer2.input_bits != expected_bits:
            raise ValueError(f"Layer 2 input_bits {self.layer2.input_bits} != {expected_bits} concatenated label bits")
        if self.layer2.label_bits != 10:
            raise ValueError("Layer 2 emits one-hot digit labels and needs label_bits = 10")
        if self.layer1.label_bits != 4:
            raise ValueError("Layer 1 labels digits with 4-bit binary codes and needs label_bits = 4")
        return self

    @model_validator(mode="after")
    def validate_tier_weights(self) -> "RunConfig":
        if self.tier_weights is None:
            return self
        needed = max(self.layer1.max_tier, self.layer2.max_tier) + 1
        if len(self.tier_weights) < needed:
            raise ValueError(f"{len(self.tier_weights)} tier_weights given; max_tier needs {needed}, one per tier")
        if any(w < 0.0 for w in self.tier_weights):
            raise ValueError("tier_weights must be non-negative")
        return self

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form, excluding machine-local paths."""
        payload = self.model_dump(mode="json", by_alias=True, exclude={"output_dir": True, "dataset": {"dir"}})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
