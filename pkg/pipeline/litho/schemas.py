import math
from typing import Literal

from ninja import Schema
from pydantic import ConfigDict, Field, model_validator


class LithoParams(Schema):
    """Gaussian aerial image plus hard resist threshold; sigma defaults to 6% of the mask width."""

    model_config = ConfigDict(extra="forbid")

    width: int = Field(64, ge=1)
    height: int = Field(64, ge=1)
    sigma: float | None = Field(None, gt=0)
    kernel_radius: int | None = Field(None, ge=1)
    threshold: float = Field(0.5, gt=0, lt=1)
    method: Literal["fft", "direct"] = "fft"

    @model_validator(mode="after")
    def resolve_kernel(self):
        if self.sigma is None:
            self.sigma = 0.06 * self.width
        minimum = math.ceil(3 * self.sigma)
        if self.kernel_radius is None:
            self.kernel_radius = minimum
        if self.kernel_radius < minimum:
            raise ValueError(f"kernel_radius={self.kernel_radius} is below ceil(3 sigma) = {minimum}")
        return self

    def for_mask(self, width: int, height: int) -> "LithoParams":
        """Same optics on a mask of another size; sigma keeps its share of the width."""
        if (width, height) == (self.width, self.height):
            return self
        data = self.model_dump()
        data.update(width=width, height=height, sigma=self.sigma * width / self.width, kernel_radius=None)
        return LithoParams(**data)
