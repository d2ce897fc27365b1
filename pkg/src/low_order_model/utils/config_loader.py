"""
Configuration loader for run configuration YAML files.

A run configuration is assembled from three sources, later ones winning:
model defaults (with dataset and output locations from ``Settings``), the
YAML file, and command-line overrides.
"""

from pathlib import Path
from typing import Any

import yaml
from loguru import logger
from pydantic import ValidationError

from ..config import ConfigurationError, settings
from ..models.config import RunConfig


def merge_dicts(base: dict[str, Any], updates: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``updates`` into a copy of ``base``."""
    merged = dict(base)
    for key, value in updates.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = value
    return merged


def cli_overrides(
    seed: int | None = None,
    output_dir: Path | None = None,
    vote_threshold: float | None = None,
    max_tier: int | None = None,
    dataset_dir: Path | None = None,
) -> dict[str, Any]:
    """Translate command-line flags into a nested override mapping; unset flags are left out."""
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if output_dir is not None:
        overrides["output_dir"] = str(output_dir)
    if vote_threshold is not None:
        overrides["vote_threshold"] = vote_threshold
    if max_tier is not None:
        overrides["layer1"] = {"max_tier": max_tier}
        overrides["layer2"] = {"max_tier": max_tier}
    if dataset_dir is not None:
        overrides["dataset"] = {"dir": str(dataset_dir)}
    return overrides


class ConfigLoader:
    """Load YAML run configurations and build validated ``RunConfig`` objects."""

    def __init__(self) -> None:
        self._cache: dict[Path, dict[str, Any]] = {}

    def load_config(self, config_path: Path, use_cache: bool = True) -> dict[str, Any]:
        """
        Load a configuration file as a plain mapping.

        Args:
            config_path: YAML file to read
            use_cache: Whether to use the cached version if available

        Returns:
            Dictionary containing the configuration data

        Raises:
            ConfigurationError: If the file is missing, unreadable or not a mapping
        """
        config_path = Path(config_path)
        if use_cache and config_path in self._cache:
            return self._cache[config_path]

        if not config_path.exists():
            raise ConfigurationError(f"Configuration file not found: {config_path}")

        try:
            with open(config_path, encoding="utf-8") as f:
                config_data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            logger.error(f"Failed to parse YAML config {config_path}: {e}")
            raise ConfigurationError(f"Cannot parse configuration {config_path}: {e}") from e

        if not isinstance(config_data, dict):
            raise ConfigurationError(f"Configuration {config_path} must be a mapping, got {type(config_data).__name__}")

        if use_cache:
            self._cache[config_path] = config_data
        logger.debug(f"Loaded configuration: {config_path}")
        return config_data

    def load_run_config(self, config_path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
        """
        Build a run configuration.

        Args:
            config_path: YAML file; ``settings.config_file`` is used when it exists and none is given
            overrides: Nested mapping applied last (see ``cli_overrides``)

        Returns:
            The validated configuration

        Raises:
            ConfigurationError: If the file cannot be read or the merged values are invalid
        """
        data: dict[str, Any] = {"dataset": {"dir": str(settings.dataset_dir)}, "output_dir": str(settings.output_dir)}
        if config_path is None and settings.config_file.exists():
            config_path = settings.config_file
        if config_path is not None:
            data = merge_dicts(data, self.load_config(config_path))
        else:
            logger.debug("No configuration file found; using built-in defaults")
        data = merge_dicts(data, overrides or {})

        try:
            return RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid run configuration: {e}") from e

    def clear_cache(self) -> None:
        """Clear the configuration cache."""
        self._cache.clear()
        logger.debug("Configuration cache cleared")


config_loader = ConfigLoader()


def load_run_config(config_path: Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Convenience wrapper around the shared loader."""
    return config_loader.load_run_config(config_path, overrides)
