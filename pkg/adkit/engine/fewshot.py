"""Reference memory banks and the few-shot anomaly map.

Every stage keeps all L2-normalized patch features of the reference images.
A test patch scores ``1 - max cos`` against its stage's bank (an exact scan
in blocks of bank rows); stage maps are upsampled and summed.
"""

import logging
from pathlib import Path
from typing import List, Literal, NamedTuple, Optional, Sequence, Union

import numpy as np
import torch
from pydantic import Field, field_validator

from adkit.core.container import load_tensors, save_tensors
from adkit.core.exceptions import PreconditionError, ShapeError
from adkit.engine.zeroshot import upsample
from adkit.models.backbone import Backbone, encode_batch
from adkit.schemas.backbone import BackboneSpec
from adkit.schemas.features import ArraySchema, PatchFeatureGrid

logger = logging.getLogger(__name__)

_UNIT_TOL = 1e-5


def _normalize_rows(features: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(features, axis=-1, keepdims=True)
    return features / np.maximum(norms, np.finfo(features.dtype).tiny)


class MemoryBank(ArraySchema):
    """Unit-norm reference features of one stage, [k * h * w, C_s]."""

    stage: int = Field(..., ge=1)
    entries: np.ndarray
    source_count: int = Field(..., ge=1)

    @field_validator("entries")
    @classmethod
    def validate_entries(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError(f"bank entries must be a non-empty 2-D array, got {v.shape}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
            raise ValueError("bank entries must have unit norm")
        return v

    @property
    def width(self) -> int:
        return int(self.entries.shape[1])

    def __len__(self) -> int:
        return int(self.entries.shape[0])


class FewShotResult(NamedTuple):
    map_f: np.ndarray
    fused_map: np.ndarray
    image_score: float


def banks_from_grids(grids: Sequence[np.ndarray]) -> List[MemoryBank]:
    """Build banks from per-stage reference grids [k, h, w, C_s]."""
    if not grids or len(grids[0]) == 0:
        raise PreconditionError("at least one reference image is required")
    banks = []
    for n, grid in enumerate(grids):
        grid = np.asarray(grid)
        entries = _normalize_rows(grid.reshape(-1, grid.shape[-1]))
        banks.append(MemoryBank(stage=n + 1, entries=entries, source_count=grid.shape[0]))
    return banks


def build_memory_banks(reference_images: np.ndarray, backbone: Backbone) -> List[MemoryBank]:
    """Encode reference images and store every patch feature per stage.

    Args:
        reference_images: Preprocessed references [k, S, S, 3]
        backbone: The encoder used for zero-shot scoring (same stages)

    Returns:
        One bank per stage with k * h * w entries (no deduplication)

    Raises:
        PreconditionError: If there are no references
    """
    reference_images = np.asarray(reference_images)
    if reference_images.ndim != 4 or reference_images.shape[0] == 0:
        raise PreconditionError("at least one reference image is required")
    _, grids = encode_batch(backbone, reference_images)
    banks = banks_from_grids(grids)
    logger.info(f"Built {len(banks)} memory banks of {len(banks[0])} entries from {len(reference_images)} references")
    return banks


def _nearest_distance(queries: np.ndarray, bank: MemoryBank, block_size: int) -> np.ndarray:
    entries = bank.entries.astype(queries.dtype, copy=False)
    best = np.full(queries.shape[0], -np.inf, dtype=queries.dtype)
    for start in range(0, len(bank), block_size):
        block = entries[start : start + block_size]
        np.maximum(best, (queries @ block.T).max(axis=1), out=best)
    return np.clip(1.0 - best, 0.0, 2.0)


def score_few_shot_map(
    grids: Sequence[Union[PatchFeatureGrid, np.ndarray]],
    banks: Sequence[MemoryBank],
    out_side: int,
    block_size: int = 4096,
) -> np.ndarray:
    """Sum over stages of the upsampled minimum cosine distance to the bank.

    Args:
        grids: One [h, w, C_s] grid per stage of the test image
        banks: One bank per stage, same order
        out_side: Output side
        block_size: Bank rows per matrix product

    Returns:
        Map [out_side, out_side] with values in [0, 2 * number of stages]

    Raises:
        ShapeError: If stages or widths of grids and banks disagree
    """
    if len(grids) != len(banks) or not banks:
        raise ShapeError(f"{len(grids)} stage grids but {len(banks)} memory banks")
    stage_maps = []
    for n, (grid, bank) in enumerate(zip(grids, banks)):
        if isinstance(grid, PatchFeatureGrid):
            grid = grid.grid
        grid = np.asarray(grid)
        if bank.stage != n + 1 or grid.shape[-1] != bank.width:
            raise ShapeError(
                f"stage {n + 1}: grid width {grid.shape[-1]} vs bank stage {bank.stage} width {bank.width}"
            )
        queries = _normalize_rows(grid.reshape(-1, grid.shape[-1]))
        distances = _nearest_distance(queries, bank, block_size).reshape(grid.shape[:2])
        stage_maps.append(upsample(torch.from_numpy(distances)[None], out_side)[0].numpy())
    return np.sum(stage_maps, axis=0)


def _min_max(m: np.ndarray) -> np.ndarray:
    span = float(m.max() - m.min())
    return (m - m.min()) / span if span > 0 else np.zeros_like(m)


def fuse_maps(m_zero: np.ndarray, m_few: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Elementwise sum of the zero-shot and few-shot maps.

    Raises:
        ShapeError: If the resolutions differ
    """
    m_zero, m_few = np.asarray(m_zero), np.asarray(m_few)
    if m_zero.shape != m_few.shape:
        raise ShapeError(f"cannot fuse maps of shape {m_zero.shape} and {m_few.shape}")
    if normalize:
        return _min_max(m_zero) + _min_max(m_few)
    return m_zero + m_few


def classify_few_shot(text_score: float, fused_map: np.ndarray) -> float:
    """Few-shot image score: text score plus the map maximum."""
    return float(text_score + np.max(fused_map))


def few_shot_result(
    m_zero: np.ndarray,
    m_few: np.ndarray,
    text_score: float,
    *,
    normalize: bool = False,
    score_map: Literal["fused", "few"] = "fused",
) -> FewShotResult:
    """Fuse the maps and score the image.

    ``score_map`` selects whether the fused map or the few-shot map alone feeds the
    image score.
    """
    fused = fuse_maps(m_zero, m_few, normalize=normalize)
    source = fused if score_map == "fused" else m_few
    return FewShotResult(m_few, fused, classify_few_shot(text_score, source))


def save_banks(path: Union[str, Path], banks: Sequence[MemoryBank], spec: Optional[BackboneSpec] = None) -> Path:
    """Write banks to an ADKH1 file as ``bank.stage{n}`` tensors."""
    meta = {"kind": "banks", "source_count": banks[0].source_count if banks else 0}
    if spec is not None:
        meta["backbone"] = spec.name
    return save_tensors(path, {f"bank.stage{b.stage}": b.entries for b in banks}, meta)


def load_banks(path: Union[str, Path], spec: BackboneSpec) -> List[MemoryBank]:
    """Read banks and check stage count and width against a spec.

    Raises:
        CheckpointNotFoundError: If the file does not exist
        CheckpointError: If the container is corrupt
        ShapeError: If the banks do not match the backbone spec
    """
    tensors, meta = load_tensors(path)
    names = [f"bank.stage{n}" for n in range(1, spec.num_stages + 1)]
    if sorted(tensors) != sorted(names):
        raise ShapeError(f"{path} holds {sorted(tensors)}, spec expects {names}")
    banks = []
    for n, name in enumerate(names, start=1):
        entries = tensors[name]
        if entries.ndim != 2 or entries.shape[1] != spec.internal_width:
            raise ShapeError(f"{name} has shape {entries.shape}, expected [*, {spec.internal_width}]")
        banks.append(MemoryBank(stage=n, entries=entries, source_count=int(meta.get("source_count", 1)) or 1))
    return banks
