"""Single scoring path shared by evaluation and prediction."""

from typing import NamedTuple, Optional, Sequence

import numpy as np

from adkit.engine.fewshot import MemoryBank, few_shot_result, score_few_shot_map
from adkit.engine.zeroshot import classify_zero_shot, compute_anomaly_map
from adkit.models.heads import ProjectionHead
from adkit.schemas.run import FewShotConfig


class ImageScore(NamedTuple):
    """Outcome of scoring one image.

    ``anomaly_map`` is the map the image is judged on: the summed zero-shot map in zero-shot
    mode and the fused zero- plus few-shot map in few-shot mode.
    """

    image_score: float
    anomaly_map: np.ndarray
    text_score: float

    @property
    def map_max(self) -> float:
        return float(np.max(self.anomaly_map))


def score_image(
    cls_embedding: np.ndarray,
    grids: Sequence[np.ndarray],
    text_features: np.ndarray,
    heads: Sequence[ProjectionHead],
    temperature: float,
    out_side: int,
    banks: Optional[Sequence[MemoryBank]] = None,
    fewshot: Optional[FewShotConfig] = None,
) -> ImageScore:
    """Score one image from its backbone features.

    Args:
        cls_embedding: Unit-norm class embedding [C]
        grids: One [h, w, C_s] grid per stage
        text_features: [2, C] text features of the image's category
        heads: Trained projection heads
        temperature: Softmax temperature
        out_side: Side of the anomaly map
        banks: Memory banks; ``None`` selects zero-shot scoring
        fewshot: Fusion options for few-shot scoring

    Returns:
        Image score, anomaly map and the zero-shot text score
    """
    text_score = classify_zero_shot(cls_embedding, text_features, temperature).abnormal_prob
    zero_map = compute_anomaly_map(grids, heads, text_features, temperature, out_side)
    if banks is None:
        return ImageScore(text_score, zero_map, text_score)

    fewshot = fewshot or FewShotConfig()
    few_map = score_few_shot_map(grids, banks, out_side, block_size=fewshot.block_size)
    result = few_shot_result(
        zero_map,
        few_map.astype(zero_map.dtype),
        text_score,
        normalize=fewshot.normalize,
        score_map=fewshot.score_map,
    )
    return ImageScore(result.image_score, result.fused_map, text_score)
