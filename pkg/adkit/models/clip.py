"""Pretrained vision-language encoder backed by open_clip.

Stage features are captured with forward hooks on the residual blocks that
close each stage, so they are post-block residual-stream states taken before
the final layer norm and projection. Only the class embedding goes through
the model's own image projection. Checkpoints published at a lower
resolution are loaded with ``force_image_size``; open_clip then resizes the
positional embeddings bicubically to the new grid.
"""

import logging
from pathlib import Path
from typing import Any, List, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from adkit.core.config import settings
from adkit.core.exceptions import ShapeError, WeightsLoadError
from adkit.models.backbone import Backbone, EncodedBatch
from adkit.schemas.backbone import BackboneSpec

logger = logging.getLogger(__name__)


class ClipBackbone(Backbone):
    """open_clip ViT with per-stage patch-token taps."""

    def __init__(self, spec: BackboneSpec) -> None:
        super().__init__(spec)
        self.device = torch.device(settings.torch_device)
        self.model, self.tokenizer = self._load(spec)
        self._captured: List[torch.Tensor] = []
        blocks = self.model.visual.transformer.resblocks
        if len(blocks) != spec.num_layers:
            raise ShapeError(
                f"{spec.model_name} has {len(blocks)} layers, spec declares {spec.num_layers}"
            )
        self._hooks = [
            blocks[boundary - 1].register_forward_hook(self._capture)
            for boundary in spec.stage_boundaries
        ]
        self._batch_first = bool(getattr(self.model.visual.transformer, "batch_first", False))
        self._mean = torch.tensor(spec.mean, device=self.device).view(1, 3, 1, 1)
        self._std = torch.tensor(spec.std, device=self.device).view(1, 3, 1, 1)

    def _load(self, spec: BackboneSpec) -> Any:
        if not spec.weights:
            raise WeightsLoadError("backbone.weights is not set; pretrained weights are required")
        if not Path(spec.weights).is_file():
            raise WeightsLoadError(f"backbone weights not found: {spec.weights}")
        try:
            import open_clip

            logger.info(f"Loading {spec.model_name} from {spec.weights} at {spec.input_side}px")
            model, _, _ = open_clip.create_model_and_transforms(
                spec.model_name,
                pretrained=spec.weights,
                force_image_size=spec.input_side,
                device=self.device,
            )
            tokenizer = open_clip.get_tokenizer(spec.model_name)
        except Exception as e:
            logger.error(f"Failed to load backbone weights: {e}")
            raise WeightsLoadError(f"cannot load {spec.model_name} weights from {spec.weights}: {e}")
        model.eval()
        for parameter in model.parameters():
            parameter.requires_grad_(False)
        return model, tokenizer

    def _capture(self, module: torch.nn.Module, inputs: Any, output: torch.Tensor) -> None:
        self._captured.append(output)

    def _patch_grid(self, tokens: torch.Tensor) -> torch.Tensor:
        if not self._batch_first:
            tokens = tokens.permute(1, 0, 2)
        side = self.spec.grid_side
        # Drop the class token
        patches = tokens[:, 1:, :]
        if patches.shape[1] != side * side:
            raise ShapeError(f"expected {side * side} patch tokens, got {patches.shape[1]}")
        return patches.reshape(patches.shape[0], side, side, patches.shape[2])

    @torch.no_grad()
    def encode_images(self, images: np.ndarray) -> EncodedBatch:
        images = self.check_batch(images)
        x = torch.from_numpy(images).to(self.device).permute(0, 3, 1, 2)
        x = (x - self._mean) / self._std
        self._captured = []
        try:
            cls_embedding = self.model.encode_image(x)
            grids = [self._patch_grid(t) for t in self._captured]
        finally:
            self._captured = []
        cls_embedding = F.normalize(cls_embedding.float(), dim=-1)
        return (
            cls_embedding.cpu().numpy(),
            [g.float().cpu().numpy() for g in grids],
        )

    @torch.no_grad()
    def encode_text(self, sentences: Sequence[str]) -> np.ndarray:
        tokens = self.tokenizer(list(sentences)).to(self.device)
        return self.model.encode_text(tokens).float().cpu().numpy()
