"""Image encoder interface and feature extraction.

A backbone turns a batch of preprocessed square images into one class
embedding per image plus one raw patch-feature grid per stage. Two
implementations exist: the pretrained vision-language encoder in
``adkit.models.clip`` and the seeded hashing encoder in
``adkit.models.synthetic``.
"""

import functools
import logging
from abc import ABC, abstractmethod
from typing import List, Sequence, Tuple

import cv2
import numpy as np

from adkit.core.cache import cache, feature_cache
from adkit.core.exceptions import PreconditionError, ShapeError
from adkit.schemas.backbone import BackboneSpec
from adkit.schemas.features import ClassEmbedding, ImageTensor, PatchFeatureGrid

logger = logging.getLogger(__name__)

# (class embeddings [B, C], one [B, h, w, C_s] grid per stage)
EncodedBatch = Tuple[np.ndarray, List[np.ndarray]]


class Backbone(ABC):
    """Frozen image/text encoder with a fixed shape contract."""

    def __init__(self, spec: BackboneSpec) -> None:
        self.spec = spec

    @property
    def cache_identity(self) -> BackboneSpec:
        return self.spec

    @abstractmethod
    def encode_images(self, images: np.ndarray) -> EncodedBatch:
        """Encode a batch of preprocessed images.

        Args:
            images: Float array [B, S, S, 3] in [0, 1] with S == spec.input_side

        Returns:
            L2-normalized class embeddings [B, C] and one raw grid
            [B, h, w, C_s] per stage
        """

    @abstractmethod
    def encode_text(self, sentences: Sequence[str]) -> np.ndarray:
        """Encode sentences into raw (un-normalized) joint-space vectors [N, C]."""

    def check_batch(self, images: np.ndarray) -> np.ndarray:
        """Validate a batch against the backbone spec and return it as float32.

        Raises:
            PreconditionError: If the side differs from ``spec.input_side``
        """
        images = np.asarray(images, dtype=np.float32)
        if images.ndim != 4 or images.shape[-1] != 3:
            raise ShapeError(f"expected a [B, S, S, 3] batch, got {images.shape}")
        side = self.spec.input_side
        if images.shape[1] != side or images.shape[2] != side:
            raise PreconditionError(
                f"image side {images.shape[1]}x{images.shape[2]} does not match "
                f"backbone input side {side}"
            )
        return images


def _resize_and_crop(array: np.ndarray, side: int, interpolation: int) -> np.ndarray:
    height, width = array.shape[:2]
    short = min(height, width)
    if short != side:
        scale = side / short
        new_w = max(side, int(round(width * scale)))
        new_h = max(side, int(round(height * scale)))
        array = cv2.resize(array, (new_w, new_h), interpolation=interpolation)
        height, width = array.shape[:2]
    top = (height - side) // 2
    left = (width - side) // 2
    return array[top : top + side, left : left + side]


def preprocess_image(pixels: np.ndarray, spec: BackboneSpec) -> np.ndarray:
    """Resize the shorter side to ``spec.input_side`` and center-crop.

    Channel normalization with the backbone mean/std happens inside the
    pretrained encoder, so the result stays in [0, 1].

    Args:
        pixels: RGB float image [H, W, 3] in [0, 1]
        spec: Backbone spec providing the input side

    Returns:
        Float32 image [S, S, 3]
    """
    image = _resize_and_crop(np.asarray(pixels, dtype=np.float32), spec.input_side, cv2.INTER_CUBIC)
    return np.clip(image, 0.0, 1.0)


def preprocess_mask(mask: np.ndarray, spec: BackboneSpec) -> np.ndarray:
    """Apply the image geometry to a binary mask with nearest-neighbour resizing."""
    resized = _resize_and_crop(np.asarray(mask, dtype=np.uint8), spec.input_side, cv2.INTER_NEAREST)
    return (resized > 0).astype(np.uint8)


def crop_box(height: int, width: int) -> Tuple[int, int, int]:
    """Return (top, left, size) of the center square ``preprocess_image`` keeps."""
    size = min(height, width)
    return (height - size) // 2, (width - size) // 2, size


@cache(prefix="features")
def _encode_one(backbone: Backbone, image: np.ndarray) -> Tuple[np.ndarray, ...]:
    cls_embedding, grids = backbone.encode_images(image[None])
    return (cls_embedding[0], *[g[0] for g in grids])


def encode_batch(backbone: Backbone, images: np.ndarray) -> EncodedBatch:
    """Encode a batch, going through the feature cache when it is enabled.

    Args:
        backbone: Encoder
        images: Preprocessed batch [B, S, S, 3]

    Returns:
        Class embeddings and per-stage grids, as ``Backbone.encode_images``
    """
    images = backbone.check_batch(images)
    if not feature_cache.enabled:
        return backbone.encode_images(images)

    per_image = [_encode_one(backbone, image) for image in images]
    cls_embedding = np.stack([p[0] for p in per_image])
    grids = [np.stack([p[1 + n] for p in per_image]) for n in range(backbone.spec.num_stages)]
    return cls_embedding, grids


@cache(prefix="text")
def encode_sentences(backbone: Backbone, sentences: Tuple[str, ...]) -> Tuple[np.ndarray]:
    """Encode sentences with the backbone's text tower (cached by spec)."""
    return (np.asarray(backbone.encode_text(list(sentences)), dtype=np.float32),)


@functools.lru_cache(maxsize=4)
def create_backbone(spec: BackboneSpec) -> Backbone:
    """Create (once per spec) the encoder a spec describes.

    Args:
        spec: Backbone specification

    Returns:
        A synthetic encoder for ``name == "synthetic"``, the pretrained one otherwise

    Raises:
        WeightsLoadError: If the pretrained weights cannot be loaded
    """
    if spec.is_synthetic:
        from adkit.models.synthetic import SyntheticBackbone

        return SyntheticBackbone(spec)

    from adkit.models.clip import ClipBackbone

    return ClipBackbone(spec)


def _to_domain(
    cls_embedding: np.ndarray, grids: Sequence[np.ndarray]
) -> Tuple[ClassEmbedding, List[PatchFeatureGrid]]:
    return (
        ClassEmbedding(vector=cls_embedding[0]),
        [PatchFeatureGrid(stage=n + 1, grid=g[0]) for n, g in enumerate(grids)],
    )


def extract_features(
    image: ImageTensor, spec: BackboneSpec
) -> Tuple[ClassEmbedding, List[PatchFeatureGrid]]:
    """Extract the class embedding and per-stage patch grids of one image.

    Args:
        image: Image already preprocessed to ``spec.input_side``
        spec: Backbone spec

    Returns:
        Unit-norm class embedding and ``spec.num_stages`` raw patch grids

    Raises:
        PreconditionError: If the image side does not match the backbone spec
        WeightsLoadError: If the pretrained weights are missing
    """
    if image.side != spec.input_side:
        raise PreconditionError(
            f"image side {image.side} does not match backbone input side {spec.input_side}"
        )
    backbone = create_backbone(spec)
    return _to_domain(*encode_batch(backbone, image.pixels[None]))


def synthetic_extract(
    image: ImageTensor, seed: int, spec: BackboneSpec
) -> Tuple[ClassEmbedding, List[PatchFeatureGrid]]:
    """Extract features with the hashing encoder under an explicit seed.

    The shape contract is kept and only the seed is replaced.
    """
    synthetic_spec = spec.model_copy(update={"name": "synthetic", "seed": seed})
    return extract_features(image, synthetic_spec)
