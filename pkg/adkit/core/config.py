"""Configuration settings for adkit.

Process-level settings come from environment variables (``ADKIT_*``) through
pydantic's ``BaseSettings``; run configurations are JSON documents validated
into ``RunConfig`` with optional ``--set key=value`` overrides.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

from pydantic import ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from adkit.core.exceptions import ConfigError
from adkit.schemas.run import RunConfig

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process settings.

    Values are loaded from ``ADKIT_``-prefixed environment variables or a
    ``.env`` file and validated.
    """

    model_config = SettingsConfigDict(
        env_prefix="ADKIT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    PROJECT_NAME: str = "adkit"
    DESCRIPTION: str = "Zero-/few-shot anomaly classification and segmentation"
    VERSION: str = "0.1.0"

    # Feature cache directory; caching is disabled when unset
    CACHE: Optional[Path] = None

    # Torch device: auto picks cuda when available
    DEVICE: str = "auto"

    # Logging settings
    LOG_LEVEL: str = "INFO"

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalize and check the logging level name.

        Args:
            v: Level name such as "info" or "DEBUG"

        Returns:
            Upper-case level name

        Raises:
            ValueError: If the level is unknown to the logging module
        """
        level = v.upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"unknown log level {v!r}")
        return level

    @property
    def torch_device(self) -> str:
        """Resolve ``DEVICE`` to a concrete torch device string."""
        if self.DEVICE != "auto":
            return self.DEVICE
        import torch

        return "cuda" if torch.cuda.is_available() else "cpu"


# Create a global settings object
settings = Settings()


def parse_override(item: str) -> Tuple[str, Any]:
    """Split a ``key=value`` override, decoding the value as JSON when possible.

    Args:
        item: Override such as ``train.epochs=0`` or ``data.layout=visa``

    Returns:
        Dotted key and decoded value

    Raises:
        ConfigError: If the item has no ``=`` or an empty key
    """
    key, sep, raw = item.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"override {item!r} must look like key=value")
    try:
        value: Any = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(document: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Apply dotted-key overrides to a nested configuration document.

    Args:
        document: Parsed JSON configuration (modified copy is returned)
        overrides: ``key=value`` strings

    Returns:
        Updated configuration document
    """
    result = json.loads(json.dumps(document))
    for item in overrides:
        key, value = parse_override(item)
        node = result
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = node[part] = {}
            elif not isinstance(child, dict):
                raise ConfigError(f"override {key!r}: {part!r} is not a section")
            node = child
        node[parts[-1]] = value
        logger.debug(f"Config override {key} = {value!r}")
    return result


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
) -> RunConfig:
    """Load and validate a run configuration.

    Args:
        path: JSON configuration file; ``None`` starts from defaults
        overrides: ``key=value`` overrides applied on top of the file

    Returns:
        Validated run configuration

    Raises:
        ConfigError: If the file is unreadable or the result is invalid
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            document = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        if not isinstance(document, dict):
            raise ConfigError(f"config {path} must contain a JSON object")

    document = apply_overrides(document, overrides)
    try:
        return RunConfig.model_validate(document)
    except ValidationError as e:
        logger.error(f"Validation error: {e.errors()}")
        raise ConfigError(f"invalid configuration: {e}")
