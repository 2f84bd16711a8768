"""Tests for feature extraction and preprocessing."""

import numpy as np
import pytest

from adkit.core.exceptions import PreconditionError, ShapeError, WeightsLoadError
from adkit.models.backbone import (
    create_backbone,
    crop_box,
    encode_batch,
    extract_features,
    preprocess_image,
    preprocess_mask,
    synthetic_extract,
)
from adkit.schemas.backbone import BackboneSpec
from adkit.schemas.features import ImageTensor


@pytest.fixture
def image(rng) -> ImageTensor:
    return ImageTensor(pixels=rng.uniform(size=(32, 32, 3)))


def test_extract_features_shapes(image, synthetic_spec):
    """Test that one class embedding and one grid per stage are returned."""
    fc, grids = extract_features(image, synthetic_spec)
    assert fc.vector.shape == (synthetic_spec.joint_width,)
    assert abs(np.linalg.norm(fc.vector) - 1.0) < 1e-5
    assert [g.stage for g in grids] == [1, 2, 3, 4]
    for grid in grids:
        assert grid.grid.shape == (4, 4, synthetic_spec.internal_width)


def test_extract_features_default_grid_side():
    """Test the published geometry: 518 px inputs with 14 px patches give 37 x 37."""
    spec = BackboneSpec()
    assert spec.grid_side == 37
    assert spec.num_stages == 4


def test_extract_features_rejects_wrong_side(synthetic_spec, rng):
    """Test that an image of the wrong size is a precondition error."""
    with pytest.raises(PreconditionError):
        extract_features(ImageTensor(pixels=rng.uniform(size=(16, 16, 3))), synthetic_spec)


def test_encode_batch_rejects_bad_batches(synthetic_backbone):
    """Test batch shape checks."""
    with pytest.raises(ShapeError):
        encode_batch(synthetic_backbone, np.zeros((32, 32, 3)))
    with pytest.raises(PreconditionError):
        encode_batch(synthetic_backbone, np.zeros((1, 24, 24, 3)))


def test_synthetic_features_are_deterministic(image, synthetic_spec):
    """Test that the same image and seed give identical features."""
    fc1, grids1 = synthetic_extract(image, 3, synthetic_spec)
    fc2, grids2 = synthetic_extract(image, 3, synthetic_spec)
    np.testing.assert_array_equal(fc1.vector, fc2.vector)
    for a, b in zip(grids1, grids2):
        np.testing.assert_array_equal(a.grid, b.grid)


def test_synthetic_seed_changes_features(image, synthetic_spec):
    """Test that different seeds give different features."""
    _, grids1 = synthetic_extract(image, 0, synthetic_spec)
    _, grids2 = synthetic_extract(image, 1, synthetic_spec)
    assert not np.allclose(grids1[0].grid, grids2[0].grid)


@pytest.mark.parametrize("seed", [2**32, 2**40 + 7])
def test_synthetic_stages_differ_for_large_seeds(image, synthetic_spec, seed):
    """Test that every stage keeps its own features when the seed exceeds 32 bits."""
    _, grids = synthetic_extract(image, seed, synthetic_spec)
    assert not np.array_equal(grids[0].grid, grids[1].grid)
    _, other = synthetic_extract(image, seed + 1, synthetic_spec)
    assert not np.array_equal(grids[0].grid, other[0].grid)


def test_synthetic_patch_locality(synthetic_spec, rng):
    """Test that changing one patch changes exactly one grid cell per stage."""
    pixels = rng.uniform(size=(32, 32, 3))
    changed = pixels.copy()
    changed[8:16, 16:24] = 1.0 - changed[8:16, 16:24]
    _, before = extract_features(ImageTensor(pixels=pixels), synthetic_spec)
    _, after = extract_features(ImageTensor(pixels=changed), synthetic_spec)
    for a, b in zip(before, after):
        differs = np.any(a.grid != b.grid, axis=-1)
        assert differs.sum() == 1
        assert differs[1, 2]


def test_synthetic_identical_patches_share_features(synthetic_spec):
    """Test that equal patches map to equal features."""
    pixels = np.zeros((32, 32, 3))
    pixels[:, :16] = 0.5
    _, grids = extract_features(ImageTensor(pixels=pixels), synthetic_spec)
    np.testing.assert_array_equal(grids[0].grid[0, 0], grids[0].grid[3, 1])
    assert not np.array_equal(grids[0].grid[0, 0], grids[0].grid[0, 3])


def test_pretrained_backbone_requires_weights():
    """Test that the pretrained encoder fails cleanly without weights."""
    with pytest.raises(WeightsLoadError) as info:
        create_backbone(BackboneSpec())
    assert info.value.exit_code == 4


def test_pretrained_backbone_missing_weights_file(tmp_path):
    """Test that a configured but missing weights file is reported."""
    with pytest.raises(WeightsLoadError):
        create_backbone(BackboneSpec(weights=str(tmp_path / "absent.bin")))


def test_create_backbone_is_shared(synthetic_spec):
    """Test that one encoder instance is created per spec."""
    assert create_backbone(synthetic_spec) is create_backbone(BackboneSpec.synthetic())


def test_preprocess_image_resizes_and_center_crops(synthetic_spec):
    """Test resize of the short side and the center crop."""
    pixels = np.zeros((64, 96, 3), dtype=np.float32)
    pixels[:, 16:80] = 1.0
    out = preprocess_image(pixels, synthetic_spec)
    assert out.shape == (32, 32, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0
    np.testing.assert_allclose(out[:, 4:28], 1.0, atol=1e-6)


def test_preprocess_mask_stays_binary(synthetic_spec):
    """Test that masks keep 0/1 values after the image geometry is applied."""
    mask = np.zeros((64, 64), dtype=np.uint8)
    mask[16:48, 16:48] = 1
    out = preprocess_mask(mask, synthetic_spec)
    assert out.shape == (32, 32)
    assert set(np.unique(out)) == {0, 1}
    assert out[8:24, 8:24].all()


def test_crop_box():
    """Test the center square of a landscape and a portrait frame."""
    assert crop_box(100, 160) == (0, 30, 100)
    assert crop_box(160, 100) == (30, 0, 100)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"stage_boundaries": (6, 12, 12, 24)},
        {"stage_boundaries": (6, 12, 18)},
        {"stage_boundaries": ()},
        {"input_side": 8},
    ],
)
def test_backbone_spec_validation(kwargs):
    """Test that inconsistent specs are rejected."""
    with pytest.raises(ValueError):
        BackboneSpec(**kwargs)
