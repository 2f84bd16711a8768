"""Training configuration schema."""

from typing import Tuple

from pydantic import Field

from adkit.schemas import BaseSchema


class TrainConfig(BaseSchema):
    """Hyperparameters of the projection-head training loop.

    Defaults follow the published recipe: Adam at a fixed 1e-3 learning rate,
    3 epochs, batch size 16, 518 pixel inputs and 20% mosaic probability.
    """

    epochs: int = Field(3, ge=0)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    image_side: int = Field(518, ge=1)
    mosaic_prob: float = Field(0.2, ge=0.0, le=1.0)
    focal_gamma: float = Field(2.0, ge=0.0)
    focal_alpha: float = Field(0.25, ge=0.0, le=1.0)
    dice_smooth: float = Field(1.0, ge=0.0)
    loss_weights: Tuple[float, float] = Field(
        (1.0, 1.0), description="Weights of the (focal, dice) terms"
    )
    temperature: float = Field(0.01, gt=0, description="Softmax temperature tau")
    init_std: float = Field(0.01, ge=0.0, description="Std of the head weights")
    seed: int = 0


# Epoch presets keyed by the dataset the heads are trained on.
TRAIN_PRESETS = {
    "mvtec": {"epochs": 15},
    "visa": {"epochs": 3},
}
