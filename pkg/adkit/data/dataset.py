"""Dataset scanning, image IO and batching.

Two tree layouts are understood:

* MVTec-style: ``<cat>/train/good/*``, ``<cat>/test/<defect>/*`` and
  ``<cat>/ground_truth/<defect>/<stem>_mask.png``.
* VisA-style: ``split_csv/1cls.csv`` with columns ``object, split, label,
  image, mask`` (paths relative to the root, label ``normal``/``anomaly``).

Both are normalized into the same ``SampleRecord`` shape.
"""

import logging
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import cv2
import numpy as np
import pandas as pd

from adkit.core.exceptions import DataError, ManifestError, PreconditionError
from adkit.models.backbone import preprocess_image, preprocess_mask
from adkit.schemas.backbone import BackboneSpec
from adkit.schemas.data import GOOD, DatasetManifest, Layout, SampleRecord, Split
from adkit.schemas.features import ArraySchema

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")
VISA_SPLIT_FILE = Path("split_csv") / "1cls.csv"
VISA_ANOMALY = "anomaly"

# Category order of the published per-category tables
MVTEC_CATEGORIES = [
    "carpet",
    "bottle",
    "hazelnut",
    "leather",
    "cable",
    "capsule",
    "grid",
    "pill",
    "transistor",
    "metal_nut",
    "screw",
    "toothbrush",
    "zipper",
    "tile",
    "wood",
]
VISA_CATEGORIES = [
    "candle",
    "capsules",
    "cashew",
    "chewinggum",
    "fryum",
    "macaroni1",
    "macaroni2",
    "pcb1",
    "pcb2",
    "pcb3",
    "pcb4",
    "pipe_fryum",
]

PathLike = Union[str, Path]


def order_categories(categories: Sequence[str]) -> List[str]:
    """Order categories like the benchmark tables, lexicographically otherwise."""
    unique = set(categories)
    for known in (MVTEC_CATEGORIES, VISA_CATEGORIES):
        if unique <= set(known):
            return [c for c in known if c in unique]
    return sorted(unique)


def detect_layout(root: PathLike) -> Layout:
    """Detect the layout of a tree: a VisA split file wins, anything else is MVTec-style."""
    if (Path(root) / VISA_SPLIT_FILE).is_file():
        return Layout.VISA
    return Layout.MVTEC


def _images_in(directory: Path) -> List[Path]:
    return sorted(p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _mvtec_mask(root: Path, category: str, defect: str, image: Path) -> Optional[Path]:
    folder = root / category / "ground_truth" / defect
    for candidate in (folder / f"{image.stem}_mask.png", folder / f"{image.stem}.png"):
        if candidate.is_file():
            return candidate
    return None


def _scan_mvtec(root: Path) -> DatasetManifest:
    categories = sorted(
        d.name
        for d in root.iterdir()
        if d.is_dir() and ((d / "test").is_dir() or (d / "train").is_dir())
    )
    samples: List[SampleRecord] = []
    missing: List[str] = []
    for category in categories:
        for split in (Split.TRAIN, Split.TEST):
            split_dir = root / category / split.value
            if not split_dir.is_dir():
                continue
            for defect_dir in sorted(d for d in split_dir.iterdir() if d.is_dir()):
                defect = defect_dir.name
                for image in _images_in(defect_dir):
                    mask_path = None
                    if defect != GOOD:
                        mask = _mvtec_mask(root, category, defect, image)
                        if mask is None:
                            missing.append(str(image))
                            continue
                        mask_path = str(mask)
                    samples.append(
                        SampleRecord(
                            category=category,
                            split=split,
                            defect_type=defect,
                            image_path=str(image),
                            mask_path=mask_path,
                            label=0 if defect == GOOD else 1,
                        )
                    )
    if missing:
        raise ManifestError("anomalous samples without masks", missing)
    samples.sort(key=lambda s: s.sort_key)
    return DatasetManifest(root=str(root), layout=Layout.MVTEC, categories=categories, samples=samples)


def _scan_visa(root: Path) -> DatasetManifest:
    try:
        table = pd.read_csv(root / VISA_SPLIT_FILE, dtype=str, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as e:
        raise DataError(f"cannot read {root / VISA_SPLIT_FILE}: {e}")
    required = {"object", "split", "label", "image", "mask"}
    if not required <= set(table.columns):
        raise DataError(f"{VISA_SPLIT_FILE} lacks columns {sorted(required - set(table.columns))}")

    samples: List[SampleRecord] = []
    missing: List[str] = []
    for row in table.itertuples(index=False):
        image = root / row.image
        if not image.is_file():
            missing.append(str(image))
            continue
        anomalous = row.label.strip().lower() == VISA_ANOMALY
        mask_path = None
        if anomalous:
            mask = root / row.mask if row.mask else None
            if mask is None or not mask.is_file():
                missing.append(str(image))
                continue
            mask_path = str(mask)
        samples.append(
            SampleRecord(
                category=row.object,
                split=Split(row.split.strip().lower()),
                defect_type=VISA_ANOMALY if anomalous else GOOD,
                image_path=str(image),
                mask_path=mask_path,
                label=int(anomalous),
            )
        )
    if missing:
        raise ManifestError("samples with missing image or mask files", missing)
    samples.sort(key=lambda s: s.sort_key)
    categories = sorted({s.category for s in samples})
    return DatasetManifest(root=str(root), layout=Layout.VISA, categories=categories, samples=samples)


def scan_dataset(root: PathLike, layout: Optional[Union[Layout, str]] = None) -> DatasetManifest:
    """Inventory a dataset tree.

    Args:
        root: Dataset root
        layout: ``mvtec``, ``visa`` or ``None``/``auto`` to detect it from the tree

    Returns:
        Manifest in lexicographic order

    Raises:
        DataError: If the root does not exist
        ManifestError: If anomalous samples lack masks
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root not found: {root}")
    resolved = detect_layout(root) if layout in (None, "auto") else Layout(layout)
    manifest = _scan_visa(root) if resolved == Layout.VISA else _scan_mvtec(root)
    logger.info(
        f"Scanned {root} ({resolved.value}): {len(manifest.categories)} categories, "
        f"{len(manifest.samples)} samples"
    )
    return manifest


def load_image(path: PathLike) -> np.ndarray:
    """Read an image as RGB float32 in [0, 1].

    Raises:
        DataError: If the file cannot be decoded
    """
    pixels = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if pixels is None:
        raise DataError(f"cannot read image {path}")
    return cv2.cvtColor(pixels, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0


def load_mask(path: PathLike, threshold: int = 128) -> np.ndarray:
    """Read a mask and binarize it at ``threshold`` (0/255 masks give 0/1).

    Raises:
        DataError: If the file cannot be decoded
    """
    mask = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if mask is None:
        raise DataError(f"cannot read mask {path}")
    return (mask >= threshold).astype(np.uint8)


def load_sample(record: SampleRecord, threshold: int = 128) -> Tuple[np.ndarray, np.ndarray]:
    """Read a sample's image and mask at native resolution.

    Normal samples get an all-zero mask of the image's size.
    """
    image = load_image(record.image_path)
    if record.mask_path is None:
        return image, np.zeros(image.shape[:2], dtype=np.uint8)
    mask = load_mask(record.mask_path, threshold)
    if mask.shape != image.shape[:2]:
        mask = cv2.resize(mask, (image.shape[1], image.shape[0]), interpolation=cv2.INTER_NEAREST)
    return image, mask


class Batch(ArraySchema):
    """Preprocessed images and masks of consecutive samples."""

    images: np.ndarray
    masks: np.ndarray
    labels: np.ndarray
    categories: List[str]
    records: List[SampleRecord]

    def __len__(self) -> int:
        return len(self.records)


def batch_indices(count: int, batch_size: int, shuffle_seed: Optional[int] = None) -> List[np.ndarray]:
    """Split ``range(count)`` into batches, permuted when a seed is given.

    The final partial batch is kept.
    """
    if batch_size < 1:
        raise PreconditionError(f"batch_size must be >= 1, got {batch_size}")
    order = np.arange(count)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(count)
    return [order[i : i + batch_size] for i in range(0, count, batch_size)]


def iterate_batches(
    samples: Union[DatasetManifest, Sequence[SampleRecord]],
    batch_size: int,
    shuffle_seed: Optional[int] = None,
    *,
    spec: BackboneSpec,
    mask_threshold: int = 128,
) -> Iterator[Batch]:
    """Yield preprocessed batches in a seed-determined order.

    Args:
        samples: Manifest or sample list
        batch_size: Samples per batch
        shuffle_seed: Permutation seed; ``None`` keeps manifest order
        spec: Backbone spec whose geometry the images are brought to
        mask_threshold: Mask binarization threshold

    Yields:
        Batches of at most ``batch_size`` samples
    """
    records = list(samples.samples if isinstance(samples, DatasetManifest) else samples)
    for indices in batch_indices(len(records), batch_size, shuffle_seed):
        chosen = [records[i] for i in indices]
        images, masks = [], []
        for record in chosen:
            image, mask = load_sample(record, mask_threshold)
            images.append(preprocess_image(image, spec))
            masks.append(preprocess_mask(mask, spec))
        yield Batch(
            images=np.stack(images),
            masks=np.stack(masks),
            labels=np.array([r.label for r in chosen], dtype=np.int64),
            categories=[r.category for r in chosen],
            records=chosen,
        )


def select_reference_samples(
    manifest: DatasetManifest, category: str, k: int, seed: int
) -> List[SampleRecord]:
    """Draw ``k`` normal training images of a category uniformly with the run seed.

    Raises:
        PreconditionError: If ``k`` < 1 or the category has fewer than ``k`` normal train images
    """
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    pool = manifest.select(category=category, split=Split.TRAIN, label=0)
    if len(pool) < k:
        raise PreconditionError(
            f"category {category!r} has {len(pool)} normal train images, {k} requested"
        )
    chosen = np.random.default_rng(seed).choice(len(pool), size=k, replace=False)
    return [pool[i] for i in chosen]
