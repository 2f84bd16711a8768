"""Zero-shot classification, anomaly maps, losses and head training.

Patch features of every stage are projected into the joint space by the
stage's head, L2-normalized, and compared with the two text rows through a
temperature softmax. The abnormal channel of every stage is upsampled to the
output side and the stages are summed. Training minimizes focal + dice on the
summed map divided by the number of stages.
"""

import logging
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from adkit.core.exceptions import PreconditionError, ShapeError
from adkit.data.dataset import iterate_batches, load_sample
from adkit.data.mosaic import compose_mosaic
from adkit.models.backbone import Backbone, encode_batch, preprocess_image, preprocess_mask
from adkit.models.heads import ProjectionHead, init_heads
from adkit.schemas.data import SampleRecord
from adkit.schemas.features import ClassEmbedding, PatchFeatureGrid
from adkit.schemas.train import TrainConfig

logger = logging.getLogger(__name__)

EPS = 1e-7

ArrayLike = Union[np.ndarray, torch.Tensor]


class ScorePair(NamedTuple):
    """Softmax over the (normal, abnormal) text rows."""

    normal_prob: float
    abnormal_prob: float


class TrainResult(NamedTuple):
    heads: List[ProjectionHead]
    epoch_losses: List[float]


def _vector(v: Union[ClassEmbedding, ArrayLike]) -> np.ndarray:
    if isinstance(v, ClassEmbedding):
        v = v.vector
    if isinstance(v, torch.Tensor):
        v = v.detach().cpu().numpy()
    return np.asarray(v, dtype=np.float64)


def classify_zero_shot(
    fc: Union[ClassEmbedding, ArrayLike], ft: ArrayLike, temperature: float = 0.01
) -> ScorePair:
    """Image-level anomaly probability from the class embedding.

    Args:
        fc: Unit-norm class embedding [C]
        ft: Text feature matrix [2, C] (normal, abnormal)
        temperature: Softmax temperature

    Returns:
        Normal and abnormal probabilities; the latter is the image score

    Raises:
        PreconditionError: If the temperature is not positive
    """
    if temperature <= 0:
        raise PreconditionError(f"temperature must be > 0, got {temperature}")
    logits = _vector(ft) @ _vector(fc) / temperature
    logits = logits - logits.max()
    weights = np.exp(logits)
    probs = weights / weights.sum()
    return ScorePair(float(probs[0]), float(probs[1]))


def _as_tensor(x: ArrayLike, like: torch.Tensor) -> torch.Tensor:
    if isinstance(x, PatchFeatureGrid):
        x = x.grid
    return torch.as_tensor(np.asarray(x) if not isinstance(x, torch.Tensor) else x).to(
        dtype=like.dtype, device=like.device
    )


def project_stage_features(grid: Union[PatchFeatureGrid, ArrayLike], head: ProjectionHead) -> torch.Tensor:
    """Project a patch grid into the joint space and L2-normalize each row.

    Args:
        grid: Features [..., C_s]
        head: Head of the grid's stage

    Returns:
        Unit-norm rows [..., C]

    Raises:
        ShapeError: If the feature width does not match the head
    """
    features = _as_tensor(grid, head.weight)
    return F.normalize(head(features), dim=-1)


def stage_probabilities(
    grids: Sequence[ArrayLike],
    heads: Sequence[ProjectionHead],
    ft: ArrayLike,
    temperature: float,
) -> List[torch.Tensor]:
    """Two-channel softmax maps of every stage.

    Args:
        grids: One batch of features [B, h, w, C_s] per stage
        heads: One head per stage
        ft: Text features [2, C], or [B, 2, C] for per-sample prompts
        temperature: Softmax temperature

    Returns:
        One [B, 2, h, w] tensor per stage; channels sum to one per pixel
    """
    if not grids:
        raise PreconditionError("at least one stage is required")
    if len(grids) != len(heads):
        raise ShapeError(f"{len(grids)} stage grids but {len(heads)} heads")
    if temperature <= 0:
        raise PreconditionError(f"temperature must be > 0, got {temperature}")

    maps = []
    for grid, head in zip(grids, heads):
        projected = project_stage_features(grid, head)
        text = _as_tensor(ft, head.weight)
        if text.dim() == 2:
            logits = torch.einsum("bhwc,kc->bkhw", projected, text)
        else:
            logits = torch.einsum("bhwc,bkc->bkhw", projected, text)
        maps.append(torch.softmax(logits / temperature, dim=1))
    return maps


def upsample(maps: torch.Tensor, out_side: int) -> torch.Tensor:
    """Bilinearly resize [B, h, w] maps to [B, out_side, out_side]."""
    if maps.shape[-1] == out_side and maps.shape[-2] == out_side:
        return maps
    return F.interpolate(maps.unsqueeze(1), size=(out_side, out_side), mode="bilinear", align_corners=False).squeeze(1)


def anomaly_maps(
    grids: Sequence[ArrayLike],
    heads: Sequence[ProjectionHead],
    ft: ArrayLike,
    temperature: float,
    out_side: int,
) -> torch.Tensor:
    """Stage-summed abnormal probability maps [B, out_side, out_side].

    Values lie in [0, number of stages]; the result is differentiable with
    respect to the heads.
    """
    probabilities = stage_probabilities(grids, heads, ft, temperature)
    return torch.stack([upsample(p[:, 1], out_side) for p in probabilities]).sum(dim=0)


def compute_anomaly_map(
    grids: Sequence[Union[PatchFeatureGrid, ArrayLike]],
    heads: Sequence[ProjectionHead],
    ft: ArrayLike,
    temperature: float,
    out_side: int,
) -> np.ndarray:
    """Anomaly map of a single image.

    Args:
        grids: One [h, w, C_s] grid per stage
        heads: One head per stage
        ft: Text features [2, C]
        temperature: Softmax temperature
        out_side: Output side

    Returns:
        Map [out_side, out_side] with values in [0, number of stages]
    """
    if not grids:
        raise PreconditionError("at least one stage is required")
    batched = [(g.grid if isinstance(g, PatchFeatureGrid) else g)[None] for g in grids]
    with torch.no_grad():
        result = anomaly_maps(batched, heads, ft, temperature, out_side)
    return result[0].cpu().numpy()


def _check_shapes(pred: torch.Tensor, mask: torch.Tensor) -> None:
    if pred.shape != mask.shape:
        raise ShapeError(f"prediction {tuple(pred.shape)} and mask {tuple(mask.shape)} differ")


def focal_loss(
    pred: torch.Tensor, mask: torch.Tensor, gamma: float = 2.0, alpha: float = 0.25, eps: float = EPS
) -> torch.Tensor:
    """Mean over pixels of -alpha (1 - p_t)^gamma log(p_t).

    ``p_t`` is ``pred`` where the mask is 1 and ``1 - pred`` elsewhere;
    predictions are clipped to [eps, 1 - eps].
    """
    _check_shapes(pred, mask)
    p = pred.clamp(eps, 1.0 - eps)
    target = mask.to(p.dtype)
    p_t = target * p + (1.0 - target) * (1.0 - p)
    return (-alpha * (1.0 - p_t) ** gamma * torch.log(p_t)).mean()


def dice_loss(pred: torch.Tensor, mask: torch.Tensor, smooth: float = 1.0) -> torch.Tensor:
    """1 - (2 sum(p g) + smooth) / (sum(p) + sum(g) + smooth), over the whole batch."""
    _check_shapes(pred, mask)
    target = mask.to(pred.dtype)
    intersection = (pred * target).sum()
    return 1.0 - (2.0 * intersection + smooth) / (pred.sum() + target.sum() + smooth)


def segmentation_loss(
    summed_map: torch.Tensor, masks: torch.Tensor, cfg: TrainConfig, num_stages: int
) -> torch.Tensor:
    """Weighted focal + dice on the stage sum divided by the number of stages."""
    pred = (summed_map / num_stages).clamp(EPS, 1.0 - EPS)
    focal_weight, dice_weight = cfg.loss_weights
    return focal_weight * focal_loss(pred, masks, cfg.focal_gamma, cfg.focal_alpha) + dice_weight * dice_loss(
        pred, masks, cfg.dice_smooth
    )


def _training_inputs(
    batch_records: Sequence[SampleRecord],
    images: np.ndarray,
    masks: np.ndarray,
    pools: Mapping[str, Sequence[SampleRecord]],
    backbone: Backbone,
    cfg: TrainConfig,
    rng: np.random.Generator,
    mask_threshold: int,
) -> Tuple[np.ndarray, np.ndarray]:
    if cfg.mosaic_prob <= 0:
        return images, masks
    spec = backbone.spec
    out_images, out_masks = [], []
    for record, image, mask in zip(batch_records, images, masks):
        # Partners are loaded only for samples that get tiled
        if rng.random() >= cfg.mosaic_prob:
            out_images.append(image)
            out_masks.append(mask)
            continue
        pool = pools[record.category]
        partners = [pool[i] for i in rng.integers(0, len(pool), size=3)]
        tiles = [(image, mask)]
        for partner in partners:
            raw_image, raw_mask = load_sample(partner, mask_threshold)
            tiles.append((preprocess_image(raw_image, spec), preprocess_mask(raw_mask, spec)))
        result = compose_mosaic([t[0] for t in tiles], [t[1] for t in tiles], side=spec.input_side)
        out_images.append(result.image)
        out_masks.append(result.mask)
    return np.stack(out_images), np.stack(out_masks)


def train_heads(
    samples: Sequence[SampleRecord],
    backbone: Backbone,
    text_features: Mapping[str, np.ndarray],
    cfg: TrainConfig,
    *,
    mask_threshold: int = 128,
    on_epoch: Optional[Callable[[int, float], None]] = None,
) -> TrainResult:
    """Train one projection head per stage with Adam at a fixed learning rate.

    The backbone stays frozen. Batch order in epoch ``e`` is drawn with seed
    ``cfg.seed + e``; mosaic partners come from the sample's category pool
    and are drawn with a generator seeded by ``cfg.seed``.

    Args:
        samples: Training samples (images with binary masks)
        backbone: Frozen encoder
        text_features: [2, C] text features per category
        cfg: Training hyperparameters
        mask_threshold: Mask binarization threshold
        on_epoch: Called with (epoch, mean loss) after every epoch

    Returns:
        Trained heads and the mean loss of every epoch

    Raises:
        PreconditionError: If there are no samples or a category lacks text features
    """
    if not samples:
        raise PreconditionError("training dataset is empty")
    missing = sorted({s.category for s in samples} - set(text_features))
    if missing:
        raise PreconditionError(f"no text features for categories {missing}")

    spec = backbone.spec
    torch.manual_seed(cfg.seed)
    heads = init_heads(spec, std=cfg.init_std, seed=cfg.seed)
    if cfg.epochs == 0:
        logger.info("epochs=0, returning initialized heads")
        return TrainResult(heads, [])

    parameters = [p for head in heads for p in head.parameters()]
    optimizer = torch.optim.Adam(parameters, lr=cfg.learning_rate)
    rng = np.random.default_rng(cfg.seed)
    pools: Dict[str, List[SampleRecord]] = {}
    for sample in samples:
        pools.setdefault(sample.category, []).append(sample)

    epoch_losses: List[float] = []
    for epoch in range(cfg.epochs):
        batch_losses = []
        for batch in iterate_batches(
            samples, cfg.batch_size, cfg.seed + epoch, spec=spec, mask_threshold=mask_threshold
        ):
            images, masks = _training_inputs(
                batch.records, batch.images, batch.masks, pools, backbone, cfg, rng, mask_threshold
            )
            _, grids = encode_batch(backbone, images)
            ft = torch.from_numpy(np.stack([text_features[c] for c in batch.categories]).astype(np.float32))
            summed = anomaly_maps(grids, heads, ft, cfg.temperature, spec.input_side)
            loss = segmentation_loss(summed, torch.from_numpy(masks), cfg, spec.num_stages)

            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            batch_losses.append(float(loss.detach()))

        mean_loss = float(np.mean(batch_losses))
        epoch_losses.append(mean_loss)
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: mean loss {mean_loss:.6f}")
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)

    return TrainResult(heads, epoch_losses)
