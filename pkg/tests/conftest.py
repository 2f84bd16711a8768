"""Test fixtures for adkit.

This module provides the synthetic backbone, toy datasets and run
configurations shared by the test packages.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Generator

import numpy as np
import pytest

from adkit.core.cache import feature_cache
from adkit.data.synthetic import make_synthetic_dataset
from adkit.models.backbone import Backbone, create_backbone
from adkit.schemas.backbone import BackboneSpec

logger = logging.getLogger(__name__)


@pytest.fixture(autouse=True)
def disabled_cache() -> Generator[None, None, None]:
    """Keep the process-wide feature cache off unless a test enables it."""
    feature_cache.close()
    yield
    feature_cache.close()


@pytest.fixture
def synthetic_spec() -> BackboneSpec:
    """Four one-layer stages, 8 pixel patches on 32 pixel inputs (4 x 4 grid)."""
    return BackboneSpec.synthetic()


@pytest.fixture
def synthetic_backbone(synthetic_spec: BackboneSpec) -> Backbone:
    return create_backbone(synthetic_spec)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def dataset_root(tmp_path: Path) -> Path:
    """Small MVTec-style tree with one category."""
    return make_synthetic_dataset(tmp_path / "data", train_count=4, test_good=4, test_defect=4)


@pytest.fixture
def smoke_dataset_root(tmp_path: Path) -> Path:
    """32 annotated test images (16 normal, 16 defective) for training runs."""
    return make_synthetic_dataset(tmp_path / "smoke", train_count=4, test_good=16, test_defect=16)


@pytest.fixture
def run_document(smoke_dataset_root: Path, tmp_path: Path, synthetic_spec: BackboneSpec) -> Dict[str, Any]:
    """Run configuration for end-to-end runs on the synthetic backbone."""
    return {
        "backbone": synthetic_spec.model_dump(mode="json"),
        "train": {
            "epochs": 3,
            "batch_size": 8,
            "learning_rate": 0.02,
            "temperature": 0.1,
            "mosaic_prob": 0.0,
            "seed": 0,
        },
        "data": {
            "train_root": str(smoke_dataset_root),
            "eval_root": str(smoke_dataset_root),
        },
        "seeds": [0],
        "output_dir": str(tmp_path / "runs"),
    }


@pytest.fixture
def config_file(run_document: Dict[str, Any], tmp_path: Path) -> Path:
    path = tmp_path / "config.json"
    path.write_text(json.dumps(run_document), encoding="utf-8")
    return path
