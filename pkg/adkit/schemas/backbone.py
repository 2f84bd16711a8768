"""Backbone specification schema."""

from typing import Optional, Tuple

from pydantic import Field, field_validator, model_validator

from adkit.schemas import FrozenSchema

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


class BackboneSpec(FrozenSchema):
    """Shape contract of an image encoder.

    The number of stages, the patch grid and the feature widths of every
    extraction are fully determined by this spec.
    """

    name: str = Field(
        "clip",
        description="Encoder family: 'clip' (pretrained) or 'synthetic'",
        examples=["clip", "synthetic"],
    )
    model_name: str = Field(
        "ViT-L-14-336",
        description="open_clip architecture name of the pretrained encoder",
    )
    weights: Optional[str] = Field(
        None, description="Path to the serialized pretrained checkpoint"
    )
    num_layers: int = Field(24, ge=1, description="Transformer depth")
    stage_boundaries: Tuple[int, ...] = Field(
        (6, 12, 18, 24),
        description="Last layer (1-based) of every stage",
    )
    patch_size: int = Field(14, ge=1)
    internal_width: int = Field(1024, ge=1, description="Backbone width C_s")
    joint_width: int = Field(768, ge=1, description="Joint embedding width C")
    input_side: int = Field(518, ge=1, description="Square input side in pixels")
    mean: Tuple[float, float, float] = CLIP_MEAN
    std: Tuple[float, float, float] = CLIP_STD
    seed: int = Field(0, description="Seed of the synthetic encoder")

    @field_validator("stage_boundaries")
    @classmethod
    def validate_boundaries(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        """Require strictly increasing, positive stage boundaries.

        Args:
            v: Stage boundaries

        Returns:
            The validated boundaries

        Raises:
            ValueError: If the list is empty, unsorted or non-positive
        """
        if not v:
            raise ValueError("stage_boundaries must not be empty")
        if v[0] < 1 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("stage_boundaries must be strictly increasing and >= 1")
        return v

    @model_validator(mode="after")
    def validate_depth(self) -> "BackboneSpec":
        """The last stage must end at the last layer."""
        if self.stage_boundaries[-1] != self.num_layers:
            raise ValueError(
                f"last stage boundary {self.stage_boundaries[-1]} "
                f"must equal num_layers {self.num_layers}"
            )
        if self.grid_side < 1:
            raise ValueError("input_side must be at least one patch")
        return self

    @property
    def num_stages(self) -> int:
        return len(self.stage_boundaries)

    @property
    def grid_side(self) -> int:
        """Patch-grid side h_n == w_n (integer division, 518 // 14 == 37)."""
        return self.input_side // self.patch_size

    @property
    def is_synthetic(self) -> bool:
        return self.name == "synthetic"

    @classmethod
    def synthetic(
        cls,
        *,
        num_stages: int = 4,
        patch_size: int = 8,
        internal_width: int = 32,
        joint_width: int = 16,
        input_side: int = 32,
        seed: int = 0,
    ) -> "BackboneSpec":
        """Build a spec for the hashing test encoder with one layer per stage."""
        return cls(
            name="synthetic",
            model_name="synthetic",
            num_layers=num_stages,
            stage_boundaries=tuple(range(1, num_stages + 1)),
            patch_size=patch_size,
            internal_width=internal_width,
            joint_width=joint_width,
            input_side=input_side,
            seed=seed,
        )
