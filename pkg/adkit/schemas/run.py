"""Run configuration schemas.

A run configuration is a JSON document validated into ``RunConfig``; every
command of the command line consumes one.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import Field, field_validator, model_validator

from adkit.schemas import BaseSchema
from adkit.schemas.backbone import BackboneSpec
from adkit.schemas.train import TRAIN_PRESETS, TrainConfig


class PromptConfig(BaseSchema):
    """Prompt asset overrides; ``None`` selects the shipped asset."""

    templates: Optional[str] = None
    normal_states: Optional[str] = None
    abnormal_states: Optional[str] = None


class DataConfig(BaseSchema):
    """Dataset locations."""

    train_root: Optional[str] = Field(None, description="Tree the heads train on")
    eval_root: Optional[str] = Field(None, description="Tree evaluated and used for references")
    layout: Literal["auto", "mvtec", "visa"] = "auto"
    mask_threshold: int = Field(128, ge=1, le=255)


class FewShotConfig(BaseSchema):
    """Few-shot fusion options."""

    normalize: bool = Field(
        False, description="Min-max normalize both maps before adding them"
    )
    score_map: Literal["fused", "few"] = Field(
        "fused", description="Map whose maximum is added to the text score"
    )
    block_size: int = Field(4096, ge=1, description="Bank rows per matrix product")
    banks: Optional[str] = Field(
        None, description="Saved memory banks (ADKH1) used by few-shot predict"
    )


class RunConfig(BaseSchema):
    """Complete configuration of one train/eval/predict invocation."""

    backbone: BackboneSpec = Field(default_factory=BackboneSpec)
    prompts: PromptConfig = Field(default_factory=PromptConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    fewshot: FewShotConfig = Field(default_factory=FewShotConfig)
    k: int = Field(0, ge=0, description="Shot count; 0 selects zero-shot")
    seeds: List[int] = Field(default_factory=lambda: [0])
    output_dir: str = "runs"
    checkpoint: Optional[str] = Field(None, description="Trained heads (ADKH1)")
    preset: Optional[Literal["mvtec", "visa"]] = Field(
        None, description="Dataset the heads are trained on; sets epoch defaults (mvtec: 15, visa: 3)"
    )

    @model_validator(mode="before")
    @classmethod
    def apply_presets(cls, data: Any) -> Any:
        """Fill training defaults from the preset and the backbone input side.

        Explicit values in the document always win.
        """
        if not isinstance(data, dict):
            return data
        data = dict(data)
        train: Dict[str, Any] = dict(data.get("train") or {})
        preset = data.get("preset")
        if preset in TRAIN_PRESETS:
            for key, value in TRAIN_PRESETS[preset].items():
                train.setdefault(key, value)
        backbone = data.get("backbone")
        if isinstance(backbone, dict) and "input_side" in backbone:
            train.setdefault("image_side", backbone["input_side"])
        elif isinstance(backbone, BackboneSpec):
            train.setdefault("image_side", backbone.input_side)
        data["train"] = train
        return data

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("seeds must not be empty")
        return v

    @model_validator(mode="after")
    def validate_sides(self) -> "RunConfig":
        if self.train.image_side != self.backbone.input_side:
            raise ValueError(
                f"train.image_side {self.train.image_side} must equal "
                f"backbone.input_side {self.backbone.input_side}"
            )
        return self
