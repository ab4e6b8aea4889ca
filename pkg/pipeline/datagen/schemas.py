from typing import Literal

from ninja import Schema
from pydantic import ConfigDict, Field, model_validator


class TrenchConfig(Schema):
    """Trench unit cell: solid below surface_row, one or two trenches cut from the top."""

    model_config = ConfigDict(extra="forbid")

    width: int = Field(64, ge=8)
    height: int = Field(256, ge=8)
    surface_row: int = Field(64, ge=1)
    count_min: int = Field(1, ge=1, le=2)
    count_max: int = Field(2, ge=1, le=2)
    width_min: int = Field(4, ge=3)
    width_max: int = Field(20, ge=3)
    depth_min: int = Field(8, ge=3)
    depth_max: int = Field(120, ge=3)
    min_gap: int = Field(2, ge=1)
    max_retries: int = Field(20, ge=0)

    @model_validator(mode="after")
    def check_ranges(self):
        if self.count_min > self.count_max:
            raise ValueError("count_min exceeds count_max")
        if self.width_min > self.width_max:
            raise ValueError("width_min exceeds width_max")
        if self.depth_min > self.depth_max:
            raise ValueError("depth_min exceeds depth_max")
        if self.width_max > self.width - self.min_gap:
            raise ValueError("width_max leaves no flat surface in the cell")
        if self.surface_row + self.depth_max >= self.height:
            raise ValueError("depth_max cuts through the bottom of the cell")
        return self


class MaskConfig(Schema):
    """Symmetric control-point edits on the two-squares base pattern."""

    model_config = ConfigDict(extra="forbid")

    size: int = Field(64, ge=16)
    min_edits: int = Field(2, ge=0)
    max_edits: int = Field(4, ge=0)
    rect_min: int = Field(2, ge=2)
    rect_max: int = Field(6, ge=2)
    aspect_min: float = Field(0.5, gt=0)
    aspect_max: float = Field(2.0, gt=0)
    outer_offset: int = Field(3, ge=1)

    @model_validator(mode="after")
    def check_ranges(self):
        if self.min_edits > self.max_edits:
            raise ValueError("min_edits exceeds max_edits")
        if self.rect_min > self.rect_max:
            raise ValueError("rect_min exceeds rect_max")
        if not 0.5 <= self.aspect_min <= self.aspect_max <= 2.0:
            raise ValueError("aspect range must lie within [0.5, 2.0]")
        return self


class DatagenConfig(Schema):
    model_config = ConfigDict(extra="forbid")

    problem: Literal["diffusion", "litho"] = "diffusion"
    count: int = Field(10800, ge=1)
    seed: int = Field(0, ge=0)
    test_fraction: float = Field(800 / 10800, ge=0, lt=1)
    test_count: int | None = Field(None, ge=0)
    trench: TrenchConfig = Field(default_factory=TrenchConfig)
    mask: MaskConfig = Field(default_factory=MaskConfig)
