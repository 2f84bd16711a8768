"""Per-stage projection heads.

Each head is an affine map ``x @ weight + bias`` from the backbone width C_s
into the joint space C. Heads are stored in the ADKH1 container as
``head.stage{n}.weight`` [C_s, C] and ``head.stage{n}.bias`` [C].
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import torch
from torch import nn

from adkit.core.container import load_tensors, save_tensors
from adkit.core.exceptions import CheckpointError, ShapeError
from adkit.schemas.backbone import BackboneSpec

logger = logging.getLogger(__name__)

HEAD_TENSOR = re.compile(r"head\.stage(\d+)\.(weight|bias)")


class ProjectionHead(nn.Module):
    """Linear layer of one stage."""

    def __init__(self, stage: int, in_width: int, out_width: int, dtype: torch.dtype = torch.float32) -> None:
        super().__init__()
        self.stage = stage
        self.weight = nn.Parameter(torch.zeros(in_width, out_width, dtype=dtype))
        self.bias = nn.Parameter(torch.zeros(out_width, dtype=dtype))

    @property
    def in_width(self) -> int:
        return int(self.weight.shape[0])

    @property
    def out_width(self) -> int:
        return int(self.weight.shape[1])

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """Apply the affine map to the last axis of ``features``."""
        if features.shape[-1] != self.in_width:
            raise ShapeError(
                f"stage {self.stage} head expects width {self.in_width}, got {features.shape[-1]}"
            )
        return features.to(self.weight.dtype) @ self.weight + self.bias

    @classmethod
    def from_arrays(cls, stage: int, weight: np.ndarray, bias: np.ndarray) -> "ProjectionHead":
        """Build a head holding copies of the given weight and bias."""
        weight = np.asarray(weight)
        bias = np.asarray(bias)
        if weight.ndim != 2 or bias.shape != (weight.shape[1],):
            raise ShapeError(f"incompatible head shapes {weight.shape} and {bias.shape}")
        dtype = torch.float64 if weight.dtype == np.float64 else torch.float32
        head = cls(stage, weight.shape[0], weight.shape[1], dtype=dtype)
        with torch.no_grad():
            head.weight.copy_(torch.from_numpy(weight.copy()))
            head.bias.copy_(torch.from_numpy(bias.copy()))
        return head


def init_heads(
    spec: BackboneSpec,
    std: float = 0.01,
    seed: int = 0,
    dtype: torch.dtype = torch.float32,
) -> List[ProjectionHead]:
    """Create one head per stage with N(0, std) weights and zero bias.

    Args:
        spec: Backbone spec giving the stage count and widths
        std: Weight standard deviation
        seed: Generator seed
        dtype: Parameter dtype

    Returns:
        Heads ordered by stage
    """
    generator = torch.Generator().manual_seed(seed)
    heads = []
    for stage in range(1, spec.num_stages + 1):
        head = ProjectionHead(stage, spec.internal_width, spec.joint_width, dtype=dtype)
        with torch.no_grad():
            head.weight.normal_(0.0, std, generator=generator)
        heads.append(head)
    return heads


def heads_to_arrays(heads: Sequence[ProjectionHead]) -> Dict[str, np.ndarray]:
    """Named float32 arrays of the heads, in container order."""
    tensors = {}
    for head in heads:
        tensors[f"head.stage{head.stage}.weight"] = head.weight.detach().cpu().numpy().astype(np.float32)
        tensors[f"head.stage{head.stage}.bias"] = head.bias.detach().cpu().numpy().astype(np.float32)
    return tensors


def save_heads(path: Union[str, Path], heads: Sequence[ProjectionHead], spec: BackboneSpec) -> Path:
    """Write heads to an ADKH1 checkpoint.

    Args:
        path: Destination file
        heads: Heads ordered by stage
        spec: Backbone spec the heads were trained against

    Returns:
        The written path
    """
    meta = {
        "kind": "heads",
        "backbone": spec.name,
        "model_name": spec.model_name,
        "stage_boundaries": list(spec.stage_boundaries),
        "internal_width": spec.internal_width,
        "joint_width": spec.joint_width,
    }
    return save_tensors(path, heads_to_arrays(heads), meta)


def load_heads(path: Union[str, Path], spec: BackboneSpec) -> List[ProjectionHead]:
    """Read heads from an ADKH1 checkpoint and check them against a spec.

    Args:
        path: Checkpoint file
        spec: Backbone spec the heads must match

    Returns:
        Heads ordered by stage

    Raises:
        CheckpointNotFoundError: If the file does not exist
        CheckpointError: If the container is corrupt or holds foreign tensor names
        ShapeError: If stage count or widths disagree with the backbone spec
    """
    tensors, _ = load_tensors(path)
    stages = []
    for name in tensors:
        match = HEAD_TENSOR.fullmatch(name)
        if match is None:
            raise CheckpointError(f"checkpoint {path} holds unexpected tensor {name!r}")
        if match.group(2) == "weight":
            stages.append(int(match.group(1)))
    stages.sort()
    if stages != list(range(1, spec.num_stages + 1)):
        raise ShapeError(
            f"checkpoint {path} holds heads for stages {stages}, "
            f"spec expects {spec.num_stages} stages"
        )
    heads = []
    for stage in stages:
        weight = tensors[f"head.stage{stage}.weight"]
        bias = tensors.get(f"head.stage{stage}.bias")
        if bias is None:
            raise ShapeError(f"checkpoint {path} has no bias for stage {stage}")
        if weight.shape != (spec.internal_width, spec.joint_width):
            raise ShapeError(
                f"stage {stage} weight is {weight.shape}, spec expects "
                f"({spec.internal_width}, {spec.joint_width})"
            )
        heads.append(ProjectionHead.from_arrays(stage, weight, bias))
    logger.info(f"Loaded {len(heads)} projection heads from {path}")
    return heads
