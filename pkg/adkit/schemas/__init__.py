"""Base schema classes for pydantic models.

This module defines the base configuration shared by every adkit schema:
configuration blocks, dataset records and metric reports.
"""

from pydantic import BaseModel, ConfigDict


class BaseSchema(BaseModel):
    """Base schema class for all adkit models.

    Unknown keys are rejected so typos in run configurations surface as
    validation errors instead of being silently ignored.
    """

    model_config = ConfigDict(
        populate_by_name=True,
        validate_assignment=True,
        extra="forbid",
    )


class FrozenSchema(BaseSchema):
    """Immutable schema for values shared across threads (specs, records)."""

    model_config = ConfigDict(
        populate_by_name=True,
        extra="forbid",
        frozen=True,
    )
