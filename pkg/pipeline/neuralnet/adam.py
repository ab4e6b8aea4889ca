from dataclasses import dataclass, field

import numpy as np

from pipeline.neuralnet.errors import NetworkError, NonFiniteGradient, network_errors
from pipeline.neuralnet.schemas import VaeConfig


@dataclass(eq=False)
class AdamState:
    first_moments: list[np.ndarray] = field(default_factory=list)
    second_moments: list[np.ndarray] = field(default_factory=list)
    step: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: list[np.ndarray], **hyperparameters) -> "AdamState":
        return cls(
            [np.zeros_like(p) for p in params],
            [np.zeros_like(p) for p in params],
            **hyperparameters,
        )

    @classmethod
    def for_config(cls, params: list[np.ndarray], config: VaeConfig) -> "AdamState":
        return cls.zeros_like(
            params, lr=config.learning_rate, beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps
        )

    def copy(self) -> "AdamState":
        return AdamState(
            [m.copy() for m in self.first_moments],
            [v.copy() for v in self.second_moments],
            self.step, self.lr, self.beta1, self.beta2, self.eps,
        )

    def astype(self, dtype) -> "AdamState":
        return AdamState(
            [m.astype(dtype) for m in self.first_moments],
            [v.astype(dtype) for v in self.second_moments],
            self.step, self.lr, self.beta1, self.beta2, self.eps,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
              ) -> tuple[list[np.ndarray], AdamState]:
    """
    One bias-corrected Adam update, applied in place.

    Every gradient is checked before any parameter moves, so a rejected step
    leaves both the parameters and the state untouched.
    """
    for index, (param, grad) in enumerate(zip(params, grads, strict=True)):
        if grad.shape != param.shape:
            raise NetworkError(
                network_errors[400].GradientShape.value.format(index=index, found=grad.shape, expected=param.shape)
            )
        if not np.all(np.isfinite(grad)):
            raise NonFiniteGradient(network_errors[400].NonFiniteGradient.value.format(index=index))

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for param, grad, m, v in zip(params, grads, state.first_moments, state.second_moments):
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        param -= state.lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params, state
