"""Learning-curve records produced by the real-time experiment."""

from pydantic import BaseModel, Field, model_validator


class ExperimentRecord(BaseModel):
    """Test error measured after one training bin."""

    bin_index: int = Field(ge=1)
    images_seen: int = Field(ge=0)
    error_rate: float = Field(ge=0.0, le=1.0)
    fallback_count: int = Field(0, ge=0)
    mean_voters: float = Field(0.0, ge=0.0)
    new_patterns: int = Field(0, ge=0)

    def to_csv_row(self) -> dict[str, int | float]:
        """Columns of the metrics file."""
        return {"bin_index": self.bin_index, "images_seen": self.images_seen, "error_rate": self.error_rate}


class ExperimentResult(BaseModel):
    """The whole learning curve of one run."""

    seed: int
    fingerprint: str
    records: list[ExperimentRecord] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_order(self) -> "ExperimentResult":
        """Records must follow the bins in order."""
        indices = [record.bin_index for record in self.records]
        if indices != list(range(1, len(indices) + 1)):
            raise ValueError(f"Records must cover bins 1..n in order, got {indices}")
        return self

    @property
    def final_error(self) -> float | None:
        return self.records[-1].error_rate if self.records else None

    @property
    def first_error(self) -> float | None:
        return self.records[0].error_rate if self.records else None

    def error_at(self, images_seen: int) -> float | None:
        """Error of the record taken after exactly ``images_seen`` training images."""
        for record in self.records:
            if record.images_seen == images_seen:
                return record.error_rate
        return None
