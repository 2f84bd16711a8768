"""Array-valued domain types.

These schemas wrap numpy arrays so the invariants of images, embeddings and
patch grids are checked once, at construction.
"""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

_UNIT_TOL = 1e-5


class ArraySchema(BaseModel):
    """Immutable schema holding numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True, extra="forbid")


def _as_float_array(v: Any) -> np.ndarray:
    array = np.asarray(v)
    if not np.issubdtype(array.dtype, np.floating):
        array = array.astype(np.float32)
    return array


class ImageTensor(ArraySchema):
    """A preprocessed square RGB image with values in [0, 1]."""

    pixels: np.ndarray
    category: str = ""

    @field_validator("pixels", mode="before")
    @classmethod
    def coerce_pixels(cls, v: Any) -> np.ndarray:
        return _as_float_array(v)

    @field_validator("pixels")
    @classmethod
    def validate_pixels(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 3 or v.shape[2] != 3 or v.shape[0] != v.shape[1]:
            raise ValueError(f"pixels must be square HxWx3, got {v.shape}")
        if not np.all(np.isfinite(v)) or v.min(initial=0.0) < 0.0 or v.max(initial=0.0) > 1.0:
            raise ValueError("pixels must be finite and lie in [0, 1]")
        return v

    @property
    def side(self) -> int:
        return int(self.pixels.shape[0])


class ClassEmbedding(ArraySchema):
    """Unit-norm image embedding in the joint space."""

    vector: np.ndarray

    @field_validator("vector", mode="before")
    @classmethod
    def coerce_vector(cls, v: Any) -> np.ndarray:
        return _as_float_array(v)

    @field_validator("vector")
    @classmethod
    def validate_vector(cls, v: np.ndarray) -> np.ndarray:
        if v.ndim != 1:
            raise ValueError(f"vector must be 1-D, got shape {v.shape}")
        norm = float(np.linalg.norm(v))
        if abs(norm - 1.0) > _UNIT_TOL:
            raise ValueError(f"class embedding must have unit norm, got {norm}")
        return v


class PatchFeatureGrid(ArraySchema):
    """Raw patch features of one encoder stage, shaped h x w x C_s."""

    stage: int = Field(..., ge=1)
    grid: np.ndarray

    @field_validator("grid", mode="before")
    @classmethod
    def coerce_grid(cls, v: Any) -> np.ndarray:
        return _as_float_array(v)

    @model_validator(mode="after")
    def validate_grid(self) -> "PatchFeatureGrid":
        if self.grid.ndim != 3 or self.grid.shape[0] * self.grid.shape[1] == 0:
            raise ValueError(f"grid must be a non-empty h x w x C array, got {self.grid.shape}")
        if not np.all(np.isfinite(self.grid)):
            raise ValueError(f"stage {self.stage} grid contains non-finite values")
        return self

    @property
    def side(self) -> int:
        return int(self.grid.shape[0])

    @property
    def width(self) -> int:
        return int(self.grid.shape[2])
