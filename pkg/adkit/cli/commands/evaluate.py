"""Evaluate command."""

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from adkit.cli.commands.train import CONFIG_FILE
from adkit.cli.deps import (
    create_run_dir,
    get_backbone,
    get_heads,
    get_manifest,
    get_reference_banks,
    get_text_features,
    write_json,
)
from adkit.core.exceptions import ConfigError, DataError
from adkit.data.dataset import iterate_batches
from adkit.engine.fewshot import MemoryBank, save_banks
from adkit.engine.metrics import category_metrics, summarize
from adkit.engine.pipeline import score_image
from adkit.engine.reporting import aggregate_reports, write_aggregate, write_report
from adkit.models.backbone import Backbone, encode_batch
from adkit.models.heads import ProjectionHead
from adkit.schemas.data import SampleRecord, Split
from adkit.schemas.metrics import ClassificationMetrics, MetricReport, SegmentationMetrics
from adkit.schemas.run import RunConfig

logger = logging.getLogger(__name__)

Mode = Literal["zero", "few"]
CategoryResult = Tuple[ClassificationMetrics, SegmentationMetrics]


def _evaluate_category(
    samples: Sequence[SampleRecord],
    backbone: Backbone,
    heads: Sequence[ProjectionHead],
    text_features: np.ndarray,
    banks: Optional[List[MemoryBank]],
    config: RunConfig,
) -> CategoryResult:
    """Score every test image of a category and compute its metrics.

    Maps are kept as float32 for one bank set at a time.
    """
    spec = backbone.spec
    scores: List[float] = []
    maps: List[np.ndarray] = []
    labels: List[int] = []
    masks: List[np.ndarray] = []

    for batch in iterate_batches(
        samples, config.train.batch_size, spec=spec, mask_threshold=config.data.mask_threshold
    ):
        cls_embeddings, grids = encode_batch(backbone, batch.images)
        for i in range(len(batch)):
            result = score_image(
                cls_embeddings[i],
                [g[i] for g in grids],
                text_features,
                heads,
                config.train.temperature,
                spec.input_side,
                banks=banks,
                fewshot=config.fewshot,
            )
            scores.append(result.image_score)
            maps.append(result.anomaly_map.astype(np.float32, copy=False))
        labels.extend(int(label) for label in batch.labels)
        masks.extend(batch.masks)

    return category_metrics(scores, labels, maps, masks)


def bank_file_name(category: str, seed: int) -> str:
    """File name of the banks few-shot evaluation saves per category and seed."""
    return f"banks-{category}-seed{seed}.adkh"


# PUBLIC_INTERFACE
def cmd_eval(config: RunConfig, mode: Mode = "zero") -> Path:
    """Evaluate trained heads on every category of ``data.eval_root``.

    One report is written per seed (``report-seed{s}``) and the mean and
    standard deviation over seeds go to ``report-aggregate``. Zero-shot
    scoring does not depend on the seed, so it runs once and its report is
    repeated for every seed. Few-shot evaluation also saves the banks of
    every category and seed as ``banks-<category>-seed{s}.adkh``.

    Args:
        config: Run configuration
        mode: ``zero`` ignores ``k``; ``few`` draws ``k`` references per category and seed

    Returns:
        Path: The run directory

    Raises:
        ConfigError: If few-shot mode is requested with ``k == 0``
        CheckpointNotFoundError: If the checkpoint is not configured or missing
        DataError: If the evaluation dataset is missing
    """
    if mode == "few" and config.k < 1:
        raise ConfigError("few-shot evaluation needs k >= 1")
    heads = get_heads(config)
    manifest = get_manifest(config.data.eval_root, config, "eval")
    if not manifest.select(split=Split.TEST):
        raise DataError(f"no test-split samples under {manifest.root}")

    backbone = get_backbone(config)
    text_features = get_text_features(config, backbone, manifest.categories)
    run_dir = create_run_dir(config)
    write_json(run_dir / CONFIG_FILE, {**config.model_dump(mode="json"), "mode": mode})

    per_seed: Dict[int, Tuple[Dict[str, ClassificationMetrics], Dict[str, SegmentationMetrics]]] = {
        seed: ({}, {}) for seed in config.seeds
    }
    for category in manifest.categories:
        samples = manifest.select(category=category, split=Split.TEST)
        if not samples:
            logger.warning(f"{category}: no test samples, skipped")
            continue
        results: Dict[int, CategoryResult] = {}
        if mode == "few":
            # Seeds run one after another so one set of maps is held at a time;
            # ADKIT_CACHE spares re-encoding the test images.
            for seed in config.seeds:
                banks = get_reference_banks(config, backbone, manifest, category, seed)
                save_banks(run_dir / bank_file_name(category, seed), banks, backbone.spec)
                results[seed] = _evaluate_category(
                    samples, backbone, heads, text_features[category], banks, config
                )
        else:
            zero_shot = _evaluate_category(samples, backbone, heads, text_features[category], None, config)
            results = {seed: zero_shot for seed in config.seeds}

        for seed, (cls_metrics, seg_metrics) in results.items():
            per_seed[seed][0][category] = cls_metrics
            per_seed[seed][1][category] = seg_metrics
        logger.info(f"{category}: evaluated {len(samples)} images")

    reports: List[MetricReport] = []
    for seed in config.seeds:
        report = summarize(*per_seed[seed])
        write_report(report, run_dir, f"report-seed{seed}")
        reports.append(report)
    write_aggregate(aggregate_reports(reports), run_dir)
    return run_dir
