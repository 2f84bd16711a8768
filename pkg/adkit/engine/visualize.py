"""Heatmap overlays for predictions.

Display normalization is per-image min-max and never feeds any metric.
"""

import logging
from pathlib import Path
from typing import Union

import cv2
import numpy as np

from adkit.models.backbone import crop_box

logger = logging.getLogger(__name__)


def normalize_for_display(anomaly_map: np.ndarray) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant map becomes all zeros."""
    anomaly_map = np.asarray(anomaly_map, dtype=np.float64)
    span = float(anomaly_map.max() - anomaly_map.min())
    if span <= 0:
        return np.zeros_like(anomaly_map)
    return (anomaly_map - anomaly_map.min()) / span


def render_overlay(image: np.ndarray, anomaly_map: np.ndarray, alpha: float = 0.5) -> np.ndarray:
    """Blend a JET heatmap of the map over the original image.

    The map covers the center square the model saw; it is resized onto that
    square and the rest of the frame gets the colormap's zero color.

    Args:
        image: Original RGB float image [H, W, 3] in [0, 1]
        anomaly_map: Square map at model resolution
        alpha: Heatmap weight

    Returns:
        BGR uint8 image [H, W, 3]
    """
    height, width = image.shape[:2]
    top, left, size = crop_box(height, width)
    display = np.zeros((height, width), dtype=np.float32)
    square = cv2.resize(normalize_for_display(anomaly_map).astype(np.float32), (size, size), interpolation=cv2.INTER_LINEAR)
    display[top : top + size, left : left + size] = square

    heat = cv2.applyColorMap(np.round(np.clip(display, 0.0, 1.0) * 255).astype(np.uint8), cv2.COLORMAP_JET)
    base = cv2.cvtColor(np.round(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8), cv2.COLOR_RGB2BGR)
    return cv2.addWeighted(heat, alpha, base, 1.0 - alpha, 0.0)


def write_overlay(path: Union[str, Path], image: np.ndarray, anomaly_map: np.ndarray) -> Path:
    """Render and save an overlay PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), render_overlay(image, anomaly_map)):
        raise OSError(f"cannot write overlay {path}")
    logger.info(f"Overlay written to {path}")
    return path
