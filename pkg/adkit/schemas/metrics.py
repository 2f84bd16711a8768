"""Metric report schemas."""

from typing import Dict, List

from pydantic import Field

from adkit.schemas import BaseSchema

# Column order of every emitted CSV report.
REPORT_COLUMNS: List[str] = [
    "auroc_segm",
    "f1max_segm",
    "ap_segm",
    "pro_segm",
    "auroc_cls",
    "f1max_cls",
    "ap_cls",
    "harmonic",
]

MEAN_ROW = "MEAN"


def _unit(description: str) -> float:
    return Field(..., ge=0.0, le=1.0, description=description)


class ClassificationMetrics(BaseSchema):
    """Image-level metrics of one category."""

    f1max: float = _unit("F1 at the optimal threshold")
    auroc: float = _unit("Area under the ROC curve")
    ap: float = _unit("Average precision")


class SegmentationMetrics(BaseSchema):
    """Pixel-level metrics of one category, pooled over its test images."""

    f1max: float = _unit("F1 at the optimal threshold")
    auroc: float = _unit("Area under the ROC curve")
    ap: float = _unit("Average precision")
    pro: float = _unit("Normalized per-region overlap up to the FPR limit")


class CategoryMetrics(BaseSchema):
    """All reported values of one category."""

    f1max_cls: float = _unit("Classification F1-max")
    f1max_seg: float = _unit("Segmentation F1-max")
    auroc_cls: float = _unit("Classification AUROC")
    auroc_seg: float = _unit("Segmentation AUROC")
    ap_cls: float = _unit("Classification AP")
    ap_seg: float = _unit("Segmentation AP")
    pro_seg: float = _unit("Segmentation PRO")
    harmonic: float = _unit("Harmonic mean of classification and segmentation F1-max")

    def as_row(self) -> Dict[str, float]:
        """Values keyed by the CSV column names."""
        return {
            "auroc_segm": self.auroc_seg,
            "f1max_segm": self.f1max_seg,
            "ap_segm": self.ap_seg,
            "pro_segm": self.pro_seg,
            "auroc_cls": self.auroc_cls,
            "f1max_cls": self.f1max_cls,
            "ap_cls": self.ap_cls,
            "harmonic": self.harmonic,
        }


class MetricReport(BaseSchema):
    """Per-category metrics plus their arithmetic mean over categories."""

    per_category: Dict[str, CategoryMetrics]
    aggregate: CategoryMetrics
