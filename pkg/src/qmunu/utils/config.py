"""Configuration management utilities."""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from .constants import MAX_NYSTROM_NODES
from .exceptions import ConfigurationError

DEFAULT_CONFIG_PATH = Path(__file__).parent.parent.parent.parent / "config.json"


@dataclass
class Config:
    """
    Validated configuration schema for qmunu.

    All values are validated upon instantiation so that a bad file fails
    before any computation starts, with the offending field named. A null
    max_workers resolves to the machine's CPU count.
    """

    max_workers: Optional[int]
    tol: float
    q: float
    mu: float
    nu: float
    seed: int
    replicas: int
    block_size: int
    contour_nodes: int
    max_doublings: int
    nystrom_nodes: int
    state_cap: int
    output_dir: str
    output_format: str

    def __post_init__(self):
        """Validates configuration values after initialization."""
        if self.max_workers is None:
            self.max_workers = os.cpu_count() or 1
        if self.max_workers <= 0:
            raise ConfigurationError("max_workers must be positive")

        if not 0 < self.tol < 1:
            raise ConfigurationError("tol must lie in (0, 1)")

        if not 0 <= self.q < 1:
            raise ConfigurationError("q must lie in [0, 1)")

        if not 0 <= self.nu <= self.mu < 1:
            raise ConfigurationError("mu and nu must satisfy 0 <= nu <= mu < 1")

        if self.replicas < 2:
            raise ConfigurationError("replicas must be at least 2")

        if self.block_size <= 0:
            raise ConfigurationError("block_size must be positive")

        if self.contour_nodes <= 0 or self.contour_nodes % 2:
            raise ConfigurationError("contour_nodes must be a positive even integer")

        if self.max_doublings < 0:
            raise ConfigurationError("max_doublings cannot be negative")

        if not 0 < self.nystrom_nodes <= MAX_NYSTROM_NODES // 2:
            raise ConfigurationError(f"nystrom_nodes must lie in (0, {MAX_NYSTROM_NODES // 2}]")

        if self.state_cap <= 0:
            raise ConfigurationError("state_cap must be positive")

        if not self.output_dir:
            raise ConfigurationError("output_dir cannot be empty")

        if self.output_format not in ("csv", "json"):
            raise ConfigurationError("output_format must be 'csv' or 'json'")

    def to_dict(self) -> Dict[str, Any]:
        """Converts the config back to a dictionary."""
        return asdict(self)


@dataclass
class RunConfig:
    """
    A fully resolved run: the subcommand, its settings and any overrides.

    The settings dictionary is the validated file configuration with
    command-line flags applied on top; serialising it reproduces the run.
    """

    subcommand: str
    settings: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"subcommand": self.subcommand, "settings": self.settings}

    def config_hash(self) -> str:
        """Returns the md5 of the canonical JSON serialisation."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.md5(canonical.encode("utf-8")).hexdigest()


def load_config(config_path: Optional[Path] = None) -> Dict[str, Any]:
    """
    Loads and validates settings from a config.json file.

    Args:
        config_path: Optional path to the config file; defaults to the root config.json

    Returns:
        A dictionary containing validated configuration settings

    Raises:
        ConfigurationError: If the config file cannot be found, parsed, or validated
    """
    try:
        config_path = Path(config_path) if config_path else DEFAULT_CONFIG_PATH

        if not config_path.exists():
            raise ConfigurationError(f"Configuration file not found at {config_path}")

        with open(config_path, "r", encoding="utf-8") as f:
            raw_config = json.load(f)

        try:
            validated_config = Config(**raw_config)
            return validated_config.to_dict()
        except TypeError as e:
            # Missing or extra fields
            raise ConfigurationError(f"Invalid configuration schema: {e}")

    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in configuration file: {e}")
    except ConfigurationError:
        raise
    except Exception as e:
        raise ConfigurationError(f"Failed to load configuration: {e}")


def apply_overrides(config: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """
    Applies command-line overrides on top of a loaded configuration.

    Keys whose value is None are ignored. Keys that are part of the
    Config schema are re-validated together; other keys are passed through.

    Raises:
        ConfigurationError: If the merged configuration is invalid
    """
    merged = dict(config)
    merged.update({key: value for key, value in overrides.items() if value is not None})

    schema_keys = Config.__dataclass_fields__.keys()
    try:
        Config(**{key: merged[key] for key in schema_keys if key in merged})
    except TypeError as e:
        raise ConfigurationError(f"Invalid configuration schema: {e}")
    return merged
