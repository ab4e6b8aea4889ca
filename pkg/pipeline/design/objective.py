"""
Design objective on the frozen decoder G:

    |M * G(z) - Y|^2 + alpha (vol((1 - M) * G(z)) - vol(y))^2 + beta TV(G(z))

M marks the final-shape half of the paired image, y is the target final shape
and Y is y placed in that half.
"""
from dataclasses import dataclass

import numpy as np

from core.errors import DimensionMismatch
from core.fields import BinaryImage, Field2D, half_mask, total_variation, total_variation_subgradient
from pipeline.design.errors import design_errors
from pipeline.design.schemas import DesignConfig
from pipeline.neuralnet.vae import VaeModel, decode, decoder_vjp


@dataclass(frozen=True)
class DesignProblem:
    target: Field2D
    mask: BinaryImage
    alpha: float = 0.1
    beta: float = 0.2
    bounds: float = 3.0
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        expected = (self.target.height, 2 * self.target.width)
        if self.mask.shape != expected:
            raise DimensionMismatch(design_errors[400].MaskShape.value.format(mask=self.mask.shape, expected=expected))

    @classmethod
    def for_target(cls, target, config: DesignConfig | None = None) -> "DesignProblem":
        config = config or DesignConfig()
        target = target if isinstance(target, Field2D) else Field2D(target)
        mask = half_mask(2 * target.width, target.height, "right")
        return cls(target, mask, config.alpha, config.beta, config.bounds, config.restarts, config.seed)

    @property
    def combined_shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def embedded_target(self) -> np.ndarray:
        """y placed in the final-shape half, zero elsewhere."""
        return np.hstack([np.zeros(self.target.shape), self.target.data])

    @property
    def target_volume(self) -> float:
        return float(self.target.data.sum())

    def check_model(self, model: VaeModel):
        height, width = self.combined_shape
        if model.input_dim != height * width:
            raise DimensionMismatch(
                design_errors[400].TargetShape.value.format(target=self.target.shape, expected=model.input_dim)
            )


@dataclass(frozen=True)
class ObjectiveTerms:
    match: float
    volume: float
    tv: float
    alpha: float
    beta: float

    @property
    def value(self) -> float:
        return self.match + self.alpha * self.volume + self.beta * self.tv

    def as_dict(self) -> dict:
        return {"value": self.value, "match": self.match, "volume": self.volume, "tv": self.tv}


def generate(model: VaeModel, z, shape) -> np.ndarray:
    return np.asarray(decode(model, z), dtype=np.float64).reshape(shape)


def objective_terms(z, problem: DesignProblem, model: VaeModel) -> ObjectiveTerms:
    image = generate(model, z, problem.combined_shape)
    return _terms(image, problem)


def _terms(image: np.ndarray, problem: DesignProblem) -> ObjectiveTerms:
    mask = problem.mask.data
    residual = mask * image - problem.embedded_target
    volume_gap = float(((1.0 - mask) * image).sum()) - problem.target_volume
    return ObjectiveTerms(
        match=float(np.sum(residual**2)),
        volume=volume_gap**2,
        tv=total_variation(image),
        alpha=problem.alpha,
        beta=problem.beta,
    )


def design_objective(z, problem: DesignProblem, model: VaeModel) -> tuple[float, np.ndarray]:
    """Objective value and its gradient with respect to z, through the decoder."""
    z = np.asarray(z, dtype=model.dtype)
    image = generate(model, z, problem.combined_shape)
    terms = _terms(image, problem)

    mask = problem.mask.data
    volume_gap = float(((1.0 - mask) * image).sum()) - problem.target_volume
    grad_image = 2.0 * mask * (mask * image - problem.embedded_target)
    grad_image += 2.0 * problem.alpha * volume_gap * (1.0 - mask)
    if problem.beta:
        grad_image += problem.beta * total_variation_subgradient(image)

    grad_z = decoder_vjp(model, z, grad_image.ravel())
    return terms.value, np.asarray(grad_z, dtype=np.float64)
