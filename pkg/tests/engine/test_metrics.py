"""Tests for the detection metrics.

The threshold metrics are checked against exhaustive reference
implementations on random instances with many ties.
"""

import itertools

import numpy as np
import pytest
from skimage import measure

from adkit.core.exceptions import PreconditionError, ShapeError
from adkit.engine.metrics import (
    LabeledScores,
    auroc,
    average_precision,
    category_metrics,
    f1_max,
    harmonic_mean,
    pro,
    summarize,
)
from adkit.schemas.metrics import ClassificationMetrics, SegmentationMetrics


def _sweep_f1(scores, labels):
    best, best_t = -1.0, None
    for t in sorted(set(scores), reverse=True):
        predicted = [s >= t for s in scores]
        tp = sum(p and l == 1 for p, l in zip(predicted, labels))
        fp = sum(p and l == 0 for p, l in zip(predicted, labels))
        fn = sum((not p) and l == 1 for p, l in zip(predicted, labels))
        f1 = 2 * tp / (2 * tp + fp + fn)
        if f1 >= best:
            best, best_t = f1, t
    return best, best_t


def _pairwise_auroc(scores, labels):
    positives = [s for s, l in zip(scores, labels) if l == 1]
    negatives = [s for s, l in zip(scores, labels) if l == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(positives, negatives))
    return wins / (len(positives) * len(negatives))


def _rank_ap(scores, labels):
    n = len(scores)
    total = 0.0
    for i in range(n):
        if labels[i] != 1:
            continue
        ahead = [j for j in range(n) if scores[j] > scores[i] or (scores[j] == scores[i] and j <= i)]
        total += sum(labels[j] for j in ahead) / len(ahead)
    return total / sum(labels)


def _random_instance(rng):
    n = int(rng.integers(2, 65))
    scores = (rng.integers(0, 12, size=n) / 11.0).tolist()
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1
    return scores, labels.tolist()


def _brute_pro(maps, masks, fpr_limit=0.3):
    regions = []
    normal_pixels = []
    for anomaly_map, mask in zip(maps, masks):
        labeled = measure.label(mask > 0, connectivity=2)
        for r in range(1, labeled.max() + 1):
            regions.append(anomaly_map[labeled == r])
        normal_pixels.append(anomaly_map[mask == 0])
    normal_pixels = np.concatenate(normal_pixels)

    points = [(0.0, 0.0)]
    for t in sorted(set(np.concatenate([m.ravel() for m in maps]).tolist()), reverse=True):
        overlap = np.mean([np.mean(region >= t) for region in regions])
        fpr = np.mean(normal_pixels >= t)
        points.append((fpr, overlap))
    area = 0.0
    for (fpr, overlap), (next_fpr, _) in zip(points, points[1:] + [(fpr_limit, 0.0)]):
        area += overlap * (min(next_fpr, fpr_limit) - min(fpr, fpr_limit))
    return area / fpr_limit


# examples


def test_f1_max_examples():
    """Test F1-max on hand-checked cases."""
    assert f1_max(LabeledScores.of([0.1, 0.9], [0, 1])) == (1.0, 0.9)
    assert f1_max(LabeledScores.of([0.5, 0.5], [1, 1])) == (1.0, 0.5)
    f1, threshold = f1_max(LabeledScores.of([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1]))
    assert f1 == pytest.approx(0.8)
    assert threshold == 0.4


def test_f1_max_prefers_smallest_tied_threshold():
    """Test that equal F1 at both ends of the curve resolves to the lower threshold."""
    f1, threshold = f1_max(LabeledScores.of([0.2, 0.4, 0.6, 0.8], [1, 0, 0, 1]))
    assert f1 == pytest.approx(2 / 3)
    assert threshold == 0.2


def test_f1_max_on_pooled_pixels(rng):
    """Test F1-max on a large float32 pixel pool against the threshold sweep."""
    scores = rng.integers(0, 50, size=4000).astype(np.float32) / 49.0
    labels = (rng.uniform(size=4000) < 0.1).astype(np.uint8)
    labels[0] = 1
    expected_f1, expected_t = _sweep_f1(scores.astype(np.float64).tolist(), labels.tolist())
    f1, threshold = f1_max(LabeledScores.of(scores, labels))
    assert f1 == pytest.approx(expected_f1, abs=1e-9)
    assert threshold == expected_t


def test_auroc_examples():
    """Test AUROC on hand-checked cases."""
    assert auroc(LabeledScores.of([0.1, 0.9], [0, 1])) == 1.0
    assert auroc(LabeledScores.of([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1])) == pytest.approx(0.75)
    assert auroc(LabeledScores.of([0.3] * 4, [0, 1, 0, 1])) == pytest.approx(0.5)


def test_average_precision_examples():
    """Test AP on hand-checked cases."""
    assert average_precision(LabeledScores.of([0.1, 0.9], [0, 1])) == 1.0
    assert average_precision(LabeledScores.of([0.2, 0.4, 0.6, 0.8], [0, 1, 0, 1])) == pytest.approx(
        (1 + 2 / 3) / 2
    )
    assert average_precision(LabeledScores.of([0.1, 0.5, 0.3], [1, 1, 1])) == 1.0


def test_metric_preconditions():
    """Test the undefined cases."""
    with pytest.raises(PreconditionError):
        f1_max(LabeledScores.of([0.1, 0.2], [0, 0]))
    with pytest.raises(PreconditionError):
        auroc(LabeledScores.of([0.1, 0.2], [1, 1]))
    with pytest.raises(PreconditionError):
        average_precision(LabeledScores.of([0.1, 0.2], [0, 0]))
    with pytest.raises(ValueError):
        LabeledScores.of([], [])
    with pytest.raises(ValueError):
        LabeledScores.of([0.1, 0.2], [0, 2])
    with pytest.raises(ValueError):
        LabeledScores.of([0.1], [0, 1])


# oracles


def test_threshold_metrics_match_exhaustive_oracles(rng):
    """Test f1_max, auroc and average_precision on 200 random instances."""
    for _ in range(200):
        scores, labels = _random_instance(rng)
        data = LabeledScores.of(scores, labels)
        expected_f1, expected_t = _sweep_f1(scores, labels)
        f1, threshold = f1_max(data)
        assert f1 == pytest.approx(expected_f1, abs=1e-9)
        assert threshold == expected_t
        assert auroc(data) == pytest.approx(_pairwise_auroc(scores, labels), abs=1e-9)
        assert average_precision(data) == pytest.approx(_rank_ap(scores, labels), abs=1e-9)


def test_auroc_reversed_labels(rng):
    """Test AUROC(1 - y) = 1 - AUROC(y) without ties."""
    for _ in range(20):
        scores = rng.permutation(30) / 29.0
        labels = rng.integers(0, 2, size=30)
        labels[:2] = [0, 1]
        forward = auroc(LabeledScores.of(scores, labels))
        backward = auroc(LabeledScores.of(scores, 1 - labels))
        assert forward + backward == pytest.approx(1.0, abs=1e-12)


def test_monotone_transforms_keep_metrics(rng):
    """Test invariance of every metric under exp and positive affine maps."""
    for _ in range(50):
        scores, labels = _random_instance(rng)
        scores = np.asarray(scores)
        base = LabeledScores.of(scores, labels)
        for transformed in (np.exp(scores), 3.0 * scores + 2.0):
            data = LabeledScores.of(transformed, labels)
            assert f1_max(data)[0] == pytest.approx(f1_max(base)[0], abs=1e-9)
            assert auroc(data) == pytest.approx(auroc(base), abs=1e-9)
            assert average_precision(data) == pytest.approx(average_precision(base), abs=1e-9)

    for _ in range(20):
        maps = [rng.uniform(size=(8, 8)) for _ in range(2)]
        masks = [(rng.uniform(size=(8, 8)) > 0.7).astype(np.uint8) for _ in range(2)]
        masks[0][0, 0], masks[0][7, 7] = 1, 0
        base = pro(maps, masks)
        assert pro([np.exp(m) for m in maps], masks) == pytest.approx(base, abs=1e-9)
        assert pro([3.0 * m + 2.0 for m in maps], masks) == pytest.approx(base, abs=1e-9)


# pro


def test_pro_matches_brute_force(rng):
    """Test PRO against an all-threshold integration on 50 random 8 x 8 instances."""
    for _ in range(50):
        count = int(rng.integers(1, 3))
        maps = [np.round(rng.uniform(size=(8, 8)), 2) for _ in range(count)]
        masks = [(rng.uniform(size=(8, 8)) > 0.75).astype(np.uint8) for _ in range(count)]
        masks[0][0, 0], masks[0][7, 7] = 1, 0
        fpr_limit = float(rng.choice([0.1, 0.3, 1.0]))
        assert pro(maps, masks, fpr_limit) == pytest.approx(_brute_pro(maps, masks, fpr_limit), abs=1e-6)


def test_pro_perfect_prediction_is_one():
    """Test that a map equal to the mask scores exactly 1."""
    mask = np.zeros((8, 8), dtype=np.uint8)
    mask[1:3, 1:3] = 1
    mask[5:8, 4:6] = 1
    assert pro([mask.astype(np.float64)], [mask]) == 1.0


def test_pro_zero_map_is_zero():
    """Test that an uninformative all-zero map scores 0."""
    mask = np.zeros((4, 4), dtype=np.uint8)
    mask[0, 0] = 1
    assert pro([np.zeros((4, 4))], [mask]) == 0.0


def test_pro_uses_eight_connectivity():
    """Test that diagonal neighbours form one region."""
    mask = np.zeros((4, 4), dtype=np.uint8)
    mask[0, 0] = mask[1, 1] = mask[1, 2] = 1
    anomaly_map = np.zeros((4, 4))
    anomaly_map[0, 0] = 1.0
    # One region a third detected at zero FPR; two 4-connected regions would give 0.5
    assert pro([anomaly_map], [mask], fpr_limit=0.3) == pytest.approx(1 / 3)


def test_pro_preconditions():
    """Test the error cases."""
    with pytest.raises(PreconditionError):
        pro([np.zeros((4, 4))], [np.zeros((4, 4))])
    with pytest.raises(ShapeError):
        pro([np.zeros((4, 4))], [np.zeros((3, 3))])
    with pytest.raises(ShapeError):
        pro([np.zeros((4, 4))], [])


# summary


@pytest.mark.parametrize(
    "a,b,expected",
    [(0.7, 0.7, 0.7), (0.7782, 0.3431, 2 * 0.7782 * 0.3431 / (0.7782 + 0.3431)), (0.7, 0.0, 0.0)],
)
def test_harmonic_mean(a, b, expected):
    """Test the harmonic mean of the two F1-max values."""
    assert harmonic_mean(a, b) == pytest.approx(expected)


def test_harmonic_example_value():
    """Test the single-category example value."""
    assert harmonic_mean(0.7782, 0.3431) == pytest.approx(0.4763, abs=1e-4)


def _cls(f1: float) -> ClassificationMetrics:
    return ClassificationMetrics(f1max=f1, auroc=0.9, ap=0.8)


def _seg(f1: float) -> SegmentationMetrics:
    return SegmentationMetrics(f1max=f1, auroc=0.95, ap=0.5, pro=0.85)


def test_summarize_orders_and_averages():
    """Test benchmark order, harmonic means and the aggregate row."""
    report = summarize({"screw": _cls(0.6), "carpet": _cls(0.8)}, {"screw": _seg(0.2), "carpet": _seg(0.4)})
    assert list(report.per_category) == ["carpet", "screw"]
    assert report.per_category["carpet"].harmonic == pytest.approx(harmonic_mean(0.8, 0.4))
    assert report.aggregate.f1max_cls == pytest.approx(0.7)
    assert report.aggregate.f1max_seg == pytest.approx(0.3)
    assert report.aggregate.harmonic == pytest.approx((harmonic_mean(0.8, 0.4) + harmonic_mean(0.6, 0.2)) / 2)


def test_summarize_rejects_category_mismatch():
    """Test that both sides must cover the same categories."""
    with pytest.raises(PreconditionError):
        summarize({"a": _cls(0.5)}, {"b": _seg(0.5)})


def test_category_metrics_pools_pixels():
    """Test image and pooled pixel metrics of a separable category."""
    masks = [np.zeros((4, 4), dtype=np.uint8), np.zeros((4, 4), dtype=np.uint8)]
    masks[1][1:3, 1:3] = 1
    maps = [np.zeros((4, 4)), masks[1].astype(np.float64) * 2.0]
    cls_metrics, seg_metrics = category_metrics([0.1, 0.9], [0, 1], maps, masks)
    assert cls_metrics.auroc == 1.0 and cls_metrics.f1max == 1.0 and cls_metrics.ap == 1.0
    assert seg_metrics.auroc == 1.0 and seg_metrics.f1max == 1.0 and seg_metrics.pro == 1.0
