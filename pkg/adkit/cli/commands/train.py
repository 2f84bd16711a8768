"""Train command."""

import json
import logging
from pathlib import Path

from adkit.cli.deps import create_run_dir, get_backbone, get_manifest, get_text_features, write_json
from adkit.core.exceptions import DataError
from adkit.engine.zeroshot import train_heads
from adkit.models.heads import save_heads
from adkit.schemas.data import Split
from adkit.schemas.run import RunConfig

logger = logging.getLogger(__name__)

HEADS_FILE = "heads.adkh"
TRAIN_LOG_FILE = "train_log.jsonl"
CONFIG_FILE = "config.json"


# PUBLIC_INTERFACE
def cmd_train(config: RunConfig) -> Path:
    """Train projection heads on the annotated split of ``data.train_root``.

    Heads learn from images with pixel masks, which is the test split of the
    auxiliary dataset. Nothing is written before the dataset has been
    scanned successfully.

    Args:
        config: Run configuration

    Returns:
        Path: The run directory holding ``heads.adkh``, ``train_log.jsonl``
        and ``config.json``

    Raises:
        ConfigError: If no training dataset is configured
        DataError: If the dataset is missing or has no annotated samples
    """
    manifest = get_manifest(config.data.train_root, config, "train")
    samples = manifest.select(split=Split.TEST)
    if not samples:
        raise DataError(f"no annotated test-split samples under {manifest.root}")
    categories = sorted({s.category for s in samples})
    logger.info(f"Training on {len(samples)} samples from {len(categories)} categories")

    backbone = get_backbone(config)
    text_features = get_text_features(config, backbone, categories)
    result = train_heads(
        samples,
        backbone,
        text_features,
        config.train,
        mask_threshold=config.data.mask_threshold,
    )

    run_dir = create_run_dir(config)
    save_heads(run_dir / HEADS_FILE, result.heads, config.backbone)
    with (run_dir / TRAIN_LOG_FILE).open("w", encoding="utf-8") as log:
        for epoch, loss in enumerate(result.epoch_losses):
            log.write(json.dumps({"epoch": epoch + 1, "loss": loss}) + "\n")
    write_json(run_dir / CONFIG_FILE, config.model_dump(mode="json"))
    logger.info(f"Training finished, heads saved to {run_dir / HEADS_FILE}")
    return run_dir
