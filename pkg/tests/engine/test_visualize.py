"""Tests for heatmap overlays."""

import cv2
import numpy as np

from adkit.engine.visualize import normalize_for_display, render_overlay, write_overlay


def test_normalize_for_display():
    """Test min-max scaling and the constant-map case."""
    np.testing.assert_allclose(normalize_for_display(np.array([[1.0, 3.0], [2.0, 1.0]])), [[0.0, 1.0], [0.5, 0.0]])
    np.testing.assert_array_equal(normalize_for_display(np.full((3, 3), 7.0)), 0.0)


def test_constant_map_gives_uniform_overlay():
    """Test that a constant map over a flat image blends to one color."""
    image = np.full((40, 40, 3), 0.5, dtype=np.float32)
    overlay = render_overlay(image, np.full((8, 8), 2.0))
    assert overlay.dtype == np.uint8
    assert np.all(overlay == overlay[0, 0])


def test_overlay_matches_original_size(tmp_path):
    """Test that a non-square image keeps its dimensions."""
    image = np.random.default_rng(0).uniform(size=(30, 50, 3)).astype(np.float32)
    anomaly_map = np.zeros((8, 8))
    anomaly_map[2:4, 2:4] = 1.0
    path = write_overlay(tmp_path / "nested" / "overlay.png", image, anomaly_map)
    written = cv2.imread(str(path))
    assert written.shape == (30, 50, 3)
