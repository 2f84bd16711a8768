"""Seeded hashing encoder.

Features are pseudo-random but fully determined by pixel content: every
patch's quantized bytes are hashed together with the seed and the stage, and
the digest seeds the generator that draws that patch's feature vector.
Identical patches therefore get identical features, which gives memory-bank
tests exact matches and makes a changed patch affect exactly one grid cell.
"""

import hashlib
import logging
from typing import Dict, List, Sequence

import numpy as np

from adkit.models.backbone import Backbone, EncodedBatch
from adkit.schemas.backbone import BackboneSpec

logger = logging.getLogger(__name__)


def _quantize(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def _draw(payload: bytes, salt: bytes, width: int) -> np.ndarray:
    digest = hashlib.blake2b(payload, digest_size=16, salt=salt).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(width).astype(np.float32)


def _unit(vector: np.ndarray) -> np.ndarray:
    return (vector / np.linalg.norm(vector)).astype(np.float32)


class SyntheticBackbone(Backbone):
    """Deterministic stand-in for the pretrained encoder (no weights, no network)."""

    def __init__(self, spec: BackboneSpec) -> None:
        super().__init__(spec)
        logger.info(
            f"Using synthetic backbone: {spec.num_stages} stages, "
            f"{spec.grid_side}x{spec.grid_side} grid, seed {spec.seed}"
        )

    def _salt(self, kind: str, stage: int = 0) -> bytes:
        # blake2b salts are limited to 16 bytes
        return hashlib.blake2b(f"{kind}:{self.spec.seed}:{stage}".encode(), digest_size=16).digest()

    def _grids(self, image: np.ndarray) -> List[np.ndarray]:
        spec = self.spec
        side, patch = spec.grid_side, spec.patch_size
        quantized = _quantize(image)
        grids = []
        for stage in range(1, spec.num_stages + 1):
            salt = self._salt("patch", stage)
            memo: Dict[bytes, np.ndarray] = {}
            grid = np.empty((side, side, spec.internal_width), dtype=np.float32)
            for i in range(side):
                for j in range(side):
                    block = quantized[i * patch : (i + 1) * patch, j * patch : (j + 1) * patch]
                    key = block.tobytes()
                    if key not in memo:
                        memo[key] = _draw(key, salt, spec.internal_width)
                    grid[i, j] = memo[key]
            grids.append(grid)
        return grids

    def encode_images(self, images: np.ndarray) -> EncodedBatch:
        images = self.check_batch(images)
        spec = self.spec
        cls_rows: List[np.ndarray] = []
        per_stage: List[List[np.ndarray]] = [[] for _ in range(spec.num_stages)]
        for image in images:
            cls_rows.append(_unit(_draw(_quantize(image).tobytes(), self._salt("cls"), spec.joint_width)))
            for n, grid in enumerate(self._grids(image)):
                per_stage[n].append(grid)
        return np.stack(cls_rows), [np.stack(g) for g in per_stage]

    def encode_text(self, sentences: Sequence[str]) -> np.ndarray:
        salt = self._salt("text")
        return np.stack([_draw(s.encode("utf-8"), salt, self.spec.joint_width) for s in sentences])

