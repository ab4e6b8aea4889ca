from typing import Literal

from ninja import Schema
from pydantic import ConfigDict, Field, model_validator

REGULARIZATION_DEFAULTS = {
    "diffusion": (0.1, 0.2),
    "litho": (0.0, 0.0),
}


class DesignConfig(Schema):
    """
    Latent-space search settings. alpha weights the volume penalty and beta the
    total variation; left unset they take the defaults of the problem.
    """

    model_config = ConfigDict(extra="forbid")

    problem: Literal["diffusion", "litho"] = "diffusion"
    alpha: float | None = Field(None, ge=0)
    beta: float | None = Field(None, ge=0)
    bounds: float = Field(3.0, gt=0)
    restarts: int = Field(8, ge=1)
    max_iter: int = Field(500, ge=1)
    tol: float = Field(1e-6, gt=0)
    memory: int = Field(10, ge=1)
    seed: int = Field(0, ge=0)
    threshold: float = Field(0.5, gt=0, lt=1)

    @model_validator(mode="after")
    def resolve_weights(self):
        alpha, beta = REGULARIZATION_DEFAULTS[self.problem]
        if self.alpha is None:
            self.alpha = alpha
        if self.beta is None:
            self.beta = beta
        return self
