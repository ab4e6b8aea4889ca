"""
Dense layers with hand-written backward passes.

Layers act on batches of row vectors, y = act(x @ W.T + b) with W of shape
(out, in). A 1-D input is treated as a batch of one and returned 1-D.
"""
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from scipy.special import expit

from core.errors import DimensionMismatch
from pipeline.neuralnet.errors import NetworkError, network_errors

Activation = Literal["identity", "elu", "sigmoid"]

SIGMOID_CLIP = 500.0


def identity(x):
    return x


def identity_derivative(x):
    return np.ones_like(x)


def elu(x):
    return np.where(x >= 0, x, np.expm1(np.minimum(x, 0)))


def elu_derivative(x):
    # right limit at 0
    return np.where(x >= 0, 1.0, np.exp(np.minimum(x, 0))).astype(np.result_type(x), copy=False)


def sigmoid(x):
    return expit(np.clip(x, -SIGMOID_CLIP, SIGMOID_CLIP))


def sigmoid_derivative(x):
    s = sigmoid(x)
    return s * (1.0 - s)


ACTIVATIONS = {
    "identity": (identity, identity_derivative),
    "elu": (elu, elu_derivative),
    "sigmoid": (sigmoid, sigmoid_derivative),
}


class LayerCache(NamedTuple):
    inputs: np.ndarray
    pre_activation: np.ndarray
    flat: bool


class LayerGrads(NamedTuple):
    weights: np.ndarray
    bias: np.ndarray


@dataclass(eq=False)
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise NetworkError(
                network_errors[400].UnknownActivation.value.format(
                    activation=self.activation, choices=sorted(ACTIVATIONS)
                )
            )
        self.weights = np.asarray(self.weights)
        self.bias = np.asarray(self.bias, dtype=self.weights.dtype)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise NetworkError(
                network_errors[400].LayerShape.value.format(weights=self.weights.shape, bias=self.bias.shape)
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise NetworkError(network_errors[400].NonFiniteParameters.value)

    @classmethod
    def glorot(cls, rng: np.random.Generator, in_features: int, out_features: int,
               activation: Activation = "identity", dtype=np.float32) -> "DenseLayer":
        """Uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias."""
        limit = np.sqrt(6.0 / (in_features + out_features))
        weights = rng.uniform(-limit, limit, size=(out_features, in_features)).astype(dtype)
        return cls(weights, np.zeros(out_features, dtype=dtype), activation)

    @classmethod
    def zeros(cls, in_features: int, out_features: int, activation: Activation = "identity",
              dtype=np.float32) -> "DenseLayer":
        return cls(np.zeros((out_features, in_features), dtype=dtype), np.zeros(out_features, dtype=dtype), activation)

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    @property
    def parameter_count(self) -> int:
        return self.weights.size + self.bias.size

    def astype(self, dtype) -> "DenseLayer":
        return DenseLayer(self.weights.astype(dtype), self.bias.astype(dtype), self.activation)

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.bias.copy(), self.activation)

    def forward(self, x) -> tuple[np.ndarray, LayerCache]:
        x = np.asarray(x)
        flat = x.ndim == 1
        batch = np.atleast_2d(x)
        if batch.shape[1] != self.in_features:
            raise DimensionMismatch(
                network_errors[400].ShapeMismatch.value.format(expected=self.in_features, found=batch.shape[1])
            )
        pre = batch @ self.weights.T + self.bias
        out = ACTIVATIONS[self.activation][0](pre)
        return (out[0] if flat else out), LayerCache(batch, pre, flat)

    def backward_pre_activation(self, delta: np.ndarray, cache: LayerCache) -> tuple[np.ndarray, LayerGrads]:
        """Backward pass given the gradient with respect to the pre-activation."""
        delta = np.atleast_2d(delta)
        grads = LayerGrads(delta.T @ cache.inputs, delta.sum(axis=0))
        grad_in = delta @ self.weights
        return (grad_in[0] if cache.flat else grad_in), grads

    def backward(self, grad_out, cache: LayerCache) -> tuple[np.ndarray, LayerGrads]:
        """Gradients of a scalar with respect to the inputs and parameters, summed over the batch."""
        grad_out = np.atleast_2d(grad_out)
        delta = grad_out * ACTIVATIONS[self.activation][1](cache.pre_activation)
        return self.backward_pre_activation(delta, cache)


def dense_forward(layer: DenseLayer, x) -> tuple[np.ndarray, LayerCache]:
    return layer.forward(x)


def dense_backward(layer: DenseLayer, grad_out, cache: LayerCache) -> tuple[np.ndarray, LayerGrads]:
    return layer.backward(grad_out, cache)
