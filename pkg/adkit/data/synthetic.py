"""Deterministic MVTec-style toy dataset for smoke runs and tests.

Every category has a patch-aligned checkerboard background of two colors.
Defective test images carry one square of the category's defect color on a
random patch cell, with a matching 0/255 mask under ``ground_truth/square``.
"""

import logging
from pathlib import Path
from typing import Sequence, Union

import cv2
import numpy as np

logger = logging.getLogger(__name__)

DEFECT = "square"


def _background(side: int, cell: int, colors: np.ndarray) -> np.ndarray:
    rows = (np.arange(side) // cell)[:, None]
    cols = (np.arange(side) // cell)[None, :]
    return colors[(rows + cols) % 2].copy()


def _write_png(path: Path, array: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if array.ndim == 3:
        array = cv2.cvtColor(array, cv2.COLOR_RGB2BGR)
    cv2.imwrite(str(path), array)


def make_synthetic_dataset(
    root: Union[str, Path],
    categories: Sequence[str] = ("widget",),
    *,
    train_count: int = 4,
    test_good: int = 4,
    test_defect: int = 4,
    side: int = 32,
    cell: int = 8,
    seed: int = 0,
) -> Path:
    """Write the toy tree under ``root`` and return it.

    Args:
        root: Destination directory
        categories: Category names
        train_count: Normal training images per category
        test_good: Normal test images per category
        test_defect: Defective test images per category
        side: Image side in pixels
        cell: Checker cell and defect size (align with the backbone patch)
        seed: Generator seed

    Returns:
        The dataset root
    """
    root = Path(root)
    rng = np.random.default_rng(seed)
    cells = side // cell
    for category in categories:
        colors = rng.integers(0, 256, size=(3, 3), dtype=np.uint8)
        background = _background(side, cell, colors[:2])
        for i in range(train_count):
            _write_png(root / category / "train" / "good" / f"{i:03d}.png", background)
        for i in range(test_good):
            _write_png(root / category / "test" / "good" / f"{i:03d}.png", background)
        for i in range(test_defect):
            image = background.copy()
            mask = np.zeros((side, side), dtype=np.uint8)
            r, c = rng.integers(0, cells, size=2) * cell
            image[r : r + cell, c : c + cell] = colors[2]
            mask[r : r + cell, c : c + cell] = 255
            _write_png(root / category / "test" / DEFECT / f"{i:03d}.png", image)
            _write_png(root / category / "ground_truth" / DEFECT / f"{i:03d}_mask.png", mask)
    logger.info(f"Synthetic dataset with {len(categories)} categories written to {root}")
    return root
