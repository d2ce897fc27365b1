"""Configuration management and shared error types for the low-order model."""

from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class ConfigurationError(Exception):
    """Exception raised for run configuration issues."""

    pass


class CapacityError(Exception):
    """Exception raised when a requested size exceeds a configured capacity."""

    def __init__(self, what: str, requested: int, limit: int):
        self.what = what
        self.requested = requested
        self.limit = limit
        super().__init__(f"{what} of {requested} exceeds the configured maximum of {limit}")


class DimensionError(ValueError):
    """Exception raised when vector or code dimensions disagree."""

    pass


class Settings(BaseSettings):
    """Process-level settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", env_prefix="LOM_", case_sensitive=False, extra="ignore"
    )

    log_level: str = Field("INFO")
    verbose: bool = Field(False)

    # Fallback locations when the YAML config does not name them
    dataset_dir: Path = Field(Path("./data/mnist"))
    output_dir: Path = Field(Path("./runs"))
    config_file: Path = Field(Path("./configs/experiment.yml"))

    # Encoder guard against 2^m blow-up
    max_code_bits: int = Field(24, ge=1, le=30)

    # Tier tolerance used for "c > 0" decisions
    retrieval_epsilon: float = Field(1e-9, gt=0.0)

    @field_validator("dataset_dir", "output_dir", "config_file", mode="before")
    @classmethod
    def parse_path(cls, v: str | Path) -> Path:
        """Convert string paths to Path objects."""
        if isinstance(v, str):
            return Path(v)
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Invalid log level. Must be one of: {valid_levels}")
        return v.upper()

    def ensure_directories(self) -> None:
        """Ensure the output directory exists."""
        self.output_dir.mkdir(parents=True, exist_ok=True)


# Global settings instance
settings = Settings()
