from typing import Literal

from ninja import Schema
from pydantic import ConfigDict, Field


class VaeConfig(Schema):
    """Dense VAE architecture and Adam training settings."""

    model_config = ConfigDict(extra="forbid")

    hidden_width: int = Field(512, ge=1)
    hidden_layers: int = Field(4, ge=1)
    latent_dim: int = Field(100, ge=1)
    learning_rate: float = Field(1e-4, gt=0)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(128, ge=1)
    epochs: int = Field(200, ge=1)
    patience: int = Field(20, ge=1)
    min_improvement: float = Field(1e-4, ge=0)
    seed: int = Field(0, ge=0)
    precision: Literal["float32", "float64"] = "float32"
