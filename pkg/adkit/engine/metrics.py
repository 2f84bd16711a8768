"""Anomaly detection metrics.

Threshold sweeps run over the unique observed scores (predict positive when
``score >= t``) plus +inf, so every curve is exact. Pixel metrics pool all
pixels of a category into one population.
"""

import logging
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import field_validator, model_validator
from skimage import measure
from sklearn.metrics import precision_recall_curve, roc_auc_score

from adkit.core.exceptions import PreconditionError, ShapeError
from adkit.data.dataset import order_categories
from adkit.schemas.features import ArraySchema
from adkit.schemas.metrics import CategoryMetrics, ClassificationMetrics, MetricReport, SegmentationMetrics

logger = logging.getLogger(__name__)

DEFAULT_FPR_LIMIT = 0.3
# F1 values closer than this count as equal when choosing the threshold
F1_TIE_TOLERANCE = 1e-12


class LabeledScores(ArraySchema):
    """Scores with binary labels of equal, non-zero length."""

    scores: np.ndarray
    labels: np.ndarray

    @field_validator("scores", mode="before")
    @classmethod
    def coerce_scores(cls, v: object) -> np.ndarray:
        return np.asarray(v, dtype=np.float64).ravel()

    @field_validator("labels", mode="before")
    @classmethod
    def coerce_labels(cls, v: object) -> np.ndarray:
        labels = np.asarray(v).ravel()
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        return labels.astype(np.int64)

    @model_validator(mode="after")
    def validate_lengths(self) -> "LabeledScores":
        if self.scores.size == 0 or self.scores.size != self.labels.size:
            raise ValueError(f"need equal non-zero lengths, got {self.scores.size} and {self.labels.size}")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        return self

    @classmethod
    def of(cls, scores: Sequence[float], labels: Sequence[int]) -> "LabeledScores":
        return cls(scores=scores, labels=labels)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return int(self.labels.size - self.labels.sum())


def _descending(data: LabeledScores) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-data.scores, kind="stable")
    return data.scores[order], data.labels[order]


def _group_ends(sorted_scores: np.ndarray) -> np.ndarray:
    """Last index of every run of equal scores in a sorted array."""
    return np.r_[np.flatnonzero(np.diff(sorted_scores) != 0), sorted_scores.size - 1]


def f1_max(data: LabeledScores) -> Tuple[float, float]:
    """Best F1 over thresholds drawn from the unique scores.

    Ties are broken by the smallest optimal threshold.

    Returns:
        (F1, threshold)

    Raises:
        PreconditionError: If there are no positive labels
    """
    if data.positives == 0:
        raise PreconditionError("f1_max needs at least one positive label")
    precision, recall, thresholds = precision_recall_curve(data.labels, data.scores)
    # The final point (recall 0) has no threshold
    precision, recall = precision[:-1], recall[:-1]
    total = precision + recall
    f1 = np.divide(2.0 * precision * recall, total, out=np.zeros_like(total), where=total > 0)
    # Thresholds ascend, so the first maximum is the smallest threshold
    best = int(np.flatnonzero(f1 >= f1.max() - F1_TIE_TOLERANCE)[0])
    return float(f1[best]), float(thresholds[best])


def auroc(data: LabeledScores) -> float:
    """Area under the ROC curve (Mann-Whitney statistic, ties count one half).

    Raises:
        PreconditionError: If only one class is present
    """
    if data.positives == 0 or data.negatives == 0:
        raise PreconditionError("auroc needs both classes")
    return float(roc_auc_score(data.labels, data.scores))


def average_precision(data: LabeledScores) -> float:
    """Mean precision at the rank of every positive.

    Ranking is by descending score; ties keep the original index order.

    Raises:
        PreconditionError: If there are no positive labels
    """
    positives = data.positives
    if positives == 0:
        raise PreconditionError("average_precision needs at least one positive label")
    _, labels = _descending(data)
    precision = np.cumsum(labels) / np.arange(1, labels.size + 1)
    return float(precision[labels == 1].sum() / positives)


def pro(
    maps: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    fpr_limit: float = DEFAULT_FPR_LIMIT,
) -> float:
    """Normalized area under the per-region-overlap curve up to ``fpr_limit``.

    Regions are the 8-connected components of every mask. At each threshold
    the region overlap is averaged over all regions of all images and paired
    with the false positive rate over all normal pixels. The curve is a step
    function (each operating point holds until the next FPR), integrated over
    [0, fpr_limit] and divided by ``fpr_limit``.

    Raises:
        PreconditionError: If the masks hold no anomalous region or no normal pixel
        ShapeError: If a map and its mask differ in shape
    """
    if len(maps) != len(masks) or not maps:
        raise ShapeError(f"{len(maps)} maps but {len(masks)} masks")
    if not 0.0 < fpr_limit <= 1.0:
        raise PreconditionError(f"fpr_limit must lie in (0, 1], got {fpr_limit}")

    scores, weights, negatives = [], [], []
    region_count = 0
    for anomaly_map, mask in zip(maps, masks):
        anomaly_map = np.asarray(anomaly_map, dtype=np.float64)
        mask = np.asarray(mask) > 0
        if anomaly_map.shape != mask.shape:
            raise ShapeError(f"map {anomaly_map.shape} and mask {mask.shape} differ")
        regions = measure.label(mask, connectivity=2)
        sizes = np.bincount(regions.ravel())
        region_count += len(sizes) - 1
        # Each pixel of region r carries 1 / |r|; background carries 0
        inverse = np.zeros_like(sizes, dtype=np.float64)
        inverse[1:] = 1.0 / sizes[1:]
        scores.append(anomaly_map.ravel())
        weights.append(inverse[regions.ravel()])
        negatives.append(~mask.ravel())

    if region_count == 0:
        raise PreconditionError("pro needs at least one anomalous region")
    all_negatives = np.concatenate(negatives)
    negative_count = int(all_negatives.sum())
    if negative_count == 0:
        raise PreconditionError("pro needs at least one normal pixel")

    all_scores = np.concatenate(scores)
    order = np.argsort(-all_scores, kind="stable")
    sorted_scores = all_scores[order]
    ends = _group_ends(sorted_scores)
    overlap = np.cumsum(np.concatenate(weights)[order])[ends] / region_count
    fpr = np.cumsum(all_negatives[order])[ends] / negative_count

    # Threshold +inf predicts nothing
    overlap = np.r_[0.0, overlap]
    fpr = np.r_[0.0, fpr]
    clipped = np.minimum(fpr, fpr_limit)
    widths = np.diff(np.r_[clipped, fpr_limit])
    area = float(np.sum(overlap * widths))
    return float(np.clip(area / fpr_limit, 0.0, 1.0))


def harmonic_mean(a: float, b: float) -> float:
    """2ab / (a + b), zero when either value is zero."""
    if a <= 0 or b <= 0:
        return 0.0
    return 2.0 * a * b / (a + b)


def category_metrics(
    image_scores: Sequence[float],
    image_labels: Sequence[int],
    maps: Sequence[np.ndarray],
    masks: Sequence[np.ndarray],
    fpr_limit: float = DEFAULT_FPR_LIMIT,
) -> Tuple[ClassificationMetrics, SegmentationMetrics]:
    """Image-level and pooled pixel-level metrics of one category."""
    if len(maps) != len(masks):
        raise ShapeError(f"{len(maps)} maps but {len(masks)} masks")
    images = LabeledScores.of(image_scores, image_labels)
    pixels = LabeledScores.of(
        np.concatenate([np.asarray(m, dtype=np.float64).ravel() for m in maps]),
        np.concatenate([(np.asarray(m) > 0).astype(np.int64).ravel() for m in masks]),
    )
    classification = ClassificationMetrics(
        f1max=f1_max(images)[0], auroc=auroc(images), ap=average_precision(images)
    )
    segmentation = SegmentationMetrics(
        f1max=f1_max(pixels)[0],
        auroc=auroc(pixels),
        ap=average_precision(pixels),
        pro=pro(maps, masks, fpr_limit),
    )
    return classification, segmentation


def summarize(
    per_category_cls: Mapping[str, ClassificationMetrics],
    per_category_seg: Mapping[str, SegmentationMetrics],
) -> MetricReport:
    """Combine per-category results into a report with harmonic means.

    The aggregate row is the arithmetic mean of every metric over categories.

    Raises:
        PreconditionError: If the two mappings cover different categories
    """
    if set(per_category_cls) != set(per_category_seg):
        raise PreconditionError(
            f"category mismatch: {sorted(set(per_category_cls) ^ set(per_category_seg))}"
        )
    if not per_category_cls:
        raise PreconditionError("no categories to summarize")

    rows: Dict[str, CategoryMetrics] = {}
    for category in order_categories(list(per_category_cls)):
        cls_metrics, seg_metrics = per_category_cls[category], per_category_seg[category]
        rows[category] = CategoryMetrics(
            f1max_cls=cls_metrics.f1max,
            f1max_seg=seg_metrics.f1max,
            auroc_cls=cls_metrics.auroc,
            auroc_seg=seg_metrics.auroc,
            ap_cls=cls_metrics.ap,
            ap_seg=seg_metrics.ap,
            pro_seg=seg_metrics.pro,
            harmonic=harmonic_mean(cls_metrics.f1max, seg_metrics.f1max),
        )

    fields: List[str] = list(CategoryMetrics.model_fields)
    aggregate = CategoryMetrics(
        **{name: float(np.mean([getattr(r, name) for r in rows.values()])) for name in fields}
    )
    return MetricReport(per_category=rows, aggregate=aggregate)
