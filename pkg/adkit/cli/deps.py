"""Shared command dependencies.

This module provides the objects every command needs: the backbone, text
features, datasets, heads and the run directory.
"""

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from adkit.core.exceptions import CheckpointNotFoundError, ConfigError
from adkit.data.dataset import load_image, scan_dataset, select_reference_samples
from adkit.engine.fewshot import MemoryBank, build_memory_banks
from adkit.engine.prompts import build_text_features
from adkit.models.backbone import Backbone, create_backbone, preprocess_image
from adkit.models.heads import ProjectionHead, load_heads
from adkit.schemas.data import DatasetManifest
from adkit.schemas.run import RunConfig

logger = logging.getLogger(__name__)


# PUBLIC_INTERFACE
def get_backbone(config: RunConfig) -> Backbone:
    """Dependency for getting the configured encoder.

    Args:
        config: Run configuration

    Returns:
        Backbone: Shared encoder instance for the backbone spec
    """
    return create_backbone(config.backbone)


# PUBLIC_INTERFACE
def get_text_features(config: RunConfig, backbone: Backbone, categories: Sequence[str]) -> Dict[str, np.ndarray]:
    """Text feature matrices keyed by category."""
    return {c: build_text_features(c, backbone, config.prompts) for c in categories}


def get_manifest(root: Optional[str], config: RunConfig, purpose: str) -> DatasetManifest:
    """Scan a configured dataset root.

    Raises:
        ConfigError: If the root is not configured
        DataError: If the root does not exist
    """
    if not root:
        raise ConfigError(f"no {purpose} dataset configured (data.{purpose}_root)")
    return scan_dataset(root, config.data.layout)


def get_heads(config: RunConfig) -> List[ProjectionHead]:
    """Load the configured checkpoint.

    Raises:
        CheckpointNotFoundError: If no checkpoint is configured or the file is missing
    """
    if not config.checkpoint:
        raise CheckpointNotFoundError("no checkpoint configured (checkpoint)")
    return load_heads(config.checkpoint, config.backbone)


def get_reference_banks(
    config: RunConfig,
    backbone: Backbone,
    manifest: DatasetManifest,
    category: str,
    seed: int,
) -> List[MemoryBank]:
    """Banks built from ``k`` normal train images drawn with the run seed."""
    references = select_reference_samples(manifest, category, config.k, seed)
    logger.info(f"{category}: seed {seed} references {[Path(r.image_path).name for r in references]}")
    return banks_from_paths([r.image_path for r in references], backbone)


def banks_from_paths(paths: Sequence[str], backbone: Backbone) -> List[MemoryBank]:
    images = np.stack([preprocess_image(load_image(p), backbone.spec) for p in paths])
    return build_memory_banks(images, backbone)


def create_run_dir(config: RunConfig) -> Path:
    """Create ``<output_dir>/run-<UTC timestamp>``, adding a suffix on collision."""
    base = Path(config.output_dir)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    candidate = base / f"run-{stamp}"
    suffix = 1
    while candidate.exists():
        candidate = base / f"run-{stamp}-{suffix}"
        suffix += 1
    candidate.mkdir(parents=True)
    logger.info(f"Run directory: {candidate}")
    return candidate


def write_json(path: Path, document: Any) -> Path:
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
