"""Predict command."""

import logging
from pathlib import Path
from typing import Literal, Sequence, Tuple

from adkit.cli.deps import (
    banks_from_paths,
    create_run_dir,
    get_backbone,
    get_heads,
    get_manifest,
    get_reference_banks,
    get_text_features,
    write_json,
)
from adkit.core.exceptions import ConfigError
from adkit.data.dataset import load_image
from adkit.engine.fewshot import load_banks
from adkit.engine.pipeline import ImageScore, score_image
from adkit.engine.visualize import write_overlay
from adkit.models.backbone import encode_batch, preprocess_image
from adkit.schemas.run import RunConfig

logger = logging.getLogger(__name__)


# PUBLIC_INTERFACE
def cmd_predict(
    config: RunConfig,
    image_path: str,
    category: str,
    references: Sequence[str] = (),
    mode: Literal["zero", "few"] = "zero",
) -> Path:
    """Score one image and write its heatmap overlay and score.

    Few-shot banks come from ``references`` when given, then from the
    saved banks in ``fewshot.banks``, otherwise from ``k`` normal train
    images of ``category`` drawn from ``data.eval_root`` with the first seed.

    Args:
        config: Run configuration
        image_path: Image to score
        category: Object name used in the prompts
        references: Reference image paths for few-shot mode
        mode: ``zero`` or ``few``

    Returns:
        Path: The run directory holding ``<stem>_overlay.png`` and ``<stem>_score.json``

    Raises:
        ConfigError: If few-shot mode has no references
        CheckpointNotFoundError: If the checkpoint or the bank file is not configured or missing
        DataError: If an image cannot be read
    """
    heads = get_heads(config)
    original = load_image(image_path)
    backbone = get_backbone(config)
    spec = backbone.spec

    banks = None
    if mode == "few":
        if references:
            banks = banks_from_paths(references, backbone)
        elif config.fewshot.banks:
            banks = load_banks(config.fewshot.banks, spec)
        elif config.k >= 1 and config.data.eval_root:
            manifest = get_manifest(config.data.eval_root, config, "eval")
            banks = get_reference_banks(config, backbone, manifest, category, config.seeds[0])
        else:
            raise ConfigError(
                "few-shot prediction needs --reference images, fewshot.banks or k >= 1 with data.eval_root"
            )

    text_features = get_text_features(config, backbone, [category])[category]
    cls_embeddings, grids = encode_batch(backbone, preprocess_image(original, spec)[None])
    result: ImageScore = score_image(
        cls_embeddings[0],
        [g[0] for g in grids],
        text_features,
        heads,
        config.train.temperature,
        spec.input_side,
        banks=banks,
        fewshot=config.fewshot,
    )

    run_dir = create_run_dir(config)
    overlay_path, score_path = prediction_paths(run_dir, image_path)
    write_overlay(overlay_path, original, result.anomaly_map)
    write_json(score_path, {"image_score": result.image_score, "map_max": result.map_max})
    logger.info(f"{Path(image_path).name}: image score {result.image_score:.6f}, map max {result.map_max:.6f}")
    return run_dir


def prediction_paths(run_dir: Path, image_path: str) -> Tuple[Path, Path]:
    """Overlay and score paths ``cmd_predict`` writes for an image."""
    stem = Path(image_path).stem
    return run_dir / f"{stem}_overlay.png", run_dir / f"{stem}_score.json"
