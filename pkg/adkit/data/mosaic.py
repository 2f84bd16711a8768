"""Mosaic augmentation: 2 x 2 tiling of four same-category samples."""

from typing import NamedTuple, Optional, Sequence

import cv2
import numpy as np

from adkit.core.exceptions import PreconditionError, ShapeError


class MosaicResult(NamedTuple):
    image: np.ndarray
    mask: np.ndarray
    label: int
    applied: bool


def tile_2x2(tiles: Sequence[np.ndarray]) -> np.ndarray:
    """Tile four equally shaped arrays as [[0, 1], [2, 3]].

    Pixel (r, c) of tile (1, 0), i.e. ``tiles[2]``, lands at (r + h, c).
    """
    if len(tiles) != 4:
        raise PreconditionError(f"mosaic needs 4 tiles, got {len(tiles)}")
    shape = tiles[0].shape
    if any(t.shape != shape for t in tiles):
        raise ShapeError(f"mosaic tiles differ in shape: {[t.shape for t in tiles]}")
    top = np.concatenate([tiles[0], tiles[1]], axis=1)
    bottom = np.concatenate([tiles[2], tiles[3]], axis=1)
    return np.concatenate([top, bottom], axis=0)


def mosaic_augment(
    images: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    categories: Sequence[str],
    p: float,
    rng: np.random.Generator,
    side: Optional[int] = None,
    labels: Optional[Sequence[int]] = None,
) -> MosaicResult:
    """With probability ``p`` tile four samples and resize back to the training side.

    One uniform draw is consumed from ``rng`` on every call.

    Args:
        images: Four float images [h, w, 3]
        masks: Four binary masks [h, w]
        categories: Category of every sample; all must be equal
        p: Mosaic probability in [0, 1]
        rng: Run generator
        side: Output side; defaults to the first image's height
        labels: Sample labels; derived from the masks when omitted

    Returns:
        Image, mask, OR of the four labels, and whether tiling happened.
        When not applied, the first sample is returned unchanged.

    Raises:
        PreconditionError: If categories differ or ``p`` is out of range
    """
    if len(images) != 4 or len(masks) != 4 or len(categories) != 4:
        raise PreconditionError("mosaic needs exactly four images, masks and categories")
    if len(set(categories)) != 1:
        raise PreconditionError(f"mosaic mixes categories {sorted(set(categories))}")
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"mosaic probability {p} outside [0, 1]")
    if labels is None:
        labels = [int(np.any(m)) for m in masks]

    if rng.random() >= p:
        return MosaicResult(images[0], masks[0], int(labels[0]), False)
    return compose_mosaic(images, masks, side, labels)


def compose_mosaic(
    images: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    side: Optional[int] = None,
    labels: Optional[Sequence[int]] = None,
) -> MosaicResult:
    """Tile four samples unconditionally and resize back to ``side``."""
    if labels is None:
        labels = [int(np.any(m)) for m in masks]
    side = side or int(images[0].shape[0])
    composite = tile_2x2([np.asarray(i, dtype=np.float32) for i in images])
    composite_mask = tile_2x2([np.asarray(m, dtype=np.uint8) for m in masks])
    image = cv2.resize(composite, (side, side), interpolation=cv2.INTER_LINEAR)
    mask = cv2.resize(composite_mask, (side, side), interpolation=cv2.INTER_NEAREST)
    return MosaicResult(image, (mask > 0).astype(np.uint8), int(any(labels)), True)
