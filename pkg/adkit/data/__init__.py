"""Dataset ingestion, batching and augmentation."""

from adkit.data.dataset import (
    MVTEC_CATEGORIES,
    VISA_CATEGORIES,
    Batch,
    iterate_batches,
    load_image,
    load_mask,
    scan_dataset,
    select_reference_samples,
)
from adkit.data.mosaic import compose_mosaic, mosaic_augment
from adkit.data.synthetic import make_synthetic_dataset

__all__ = [
    "MVTEC_CATEGORIES",
    "VISA_CATEGORIES",
    "Batch",
    "compose_mosaic",
    "iterate_batches",
    "load_image",
    "load_mask",
    "make_synthetic_dataset",
    "mosaic_augment",
    "scan_dataset",
    "select_reference_samples",
]
