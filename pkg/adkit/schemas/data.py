"""Dataset manifest schemas."""

from enum import Enum
from typing import List, Optional

from pydantic import Field, model_validator

from adkit.schemas import FrozenSchema


class Layout(str, Enum):
    """Supported dataset tree layouts."""

    MVTEC = "mvtec"
    VISA = "visa"


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


GOOD = "good"


class SampleRecord(FrozenSchema):
    """One image of a dataset together with its optional ground-truth mask."""

    category: str = Field(..., min_length=1, examples=["bottle"])
    split: Split
    defect_type: str = Field(..., min_length=1, examples=["good", "crack"])
    image_path: str
    mask_path: Optional[str] = None
    label: int = Field(..., ge=0, le=1)

    @model_validator(mode="after")
    def validate_label(self) -> "SampleRecord":
        """label is 0 exactly for the 'good' defect type."""
        if (self.label == 0) != (self.defect_type == GOOD):
            raise ValueError(
                f"label {self.label} inconsistent with defect type {self.defect_type!r}"
            )
        return self

    @property
    def sort_key(self) -> tuple:
        return (self.category, self.split.value, self.defect_type, self.image_path)


class DatasetManifest(FrozenSchema):
    """Immutable, lexicographically ordered inventory of a dataset tree."""

    root: str
    layout: Layout
    categories: List[str] = Field(default_factory=list)
    samples: List[SampleRecord] = Field(default_factory=list)

    def select(
        self,
        *,
        category: Optional[str] = None,
        split: Optional[Split] = None,
        label: Optional[int] = None,
    ) -> List[SampleRecord]:
        """Filter samples, keeping manifest order."""
        return [
            s
            for s in self.samples
            if (category is None or s.category == category)
            and (split is None or s.split == split)
            and (label is None or s.label == label)
        ]
