"""
Fully connected variational autoencoder on flattened paired images.

Encoder: hidden elu layers, then two identity heads for mu and logvar.
Decoder: hidden elu layers, then a sigmoid output layer of the input size.
The loss is binary cross entropy plus the closed-form KL divergence to the
standard normal prior, both summed over dimensions and averaged over the batch.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from core.errors import DimensionMismatch
from pipeline.neuralnet.errors import network_errors
from pipeline.neuralnet.layers import DenseLayer, LayerCache, LayerGrads
from pipeline.neuralnet.schemas import VaeConfig

logger = logging.getLogger(__name__)

BCE_CLIP = 1e-7


@dataclass(eq=False)
class VaeModel:
    encoder: list[DenseLayer]
    mu_head: DenseLayer
    logvar_head: DenseLayer
    decoder: list[DenseLayer]

    @classmethod
    def build(cls, input_dim: int, latent_dim: int, hidden_width: int = 512, hidden_layers: int = 4,
              seed: int = 0, dtype=np.float32) -> "VaeModel":
        rng = np.random.default_rng(seed)
        encoder, width = [], input_dim
        for _ in range(hidden_layers):
            encoder.append(DenseLayer.glorot(rng, width, hidden_width, "elu", dtype))
            width = hidden_width
        mu_head = DenseLayer.glorot(rng, width, latent_dim, "identity", dtype)
        logvar_head = DenseLayer.glorot(rng, width, latent_dim, "identity", dtype)
        decoder, width = [], latent_dim
        for _ in range(hidden_layers):
            decoder.append(DenseLayer.glorot(rng, width, hidden_width, "elu", dtype))
            width = hidden_width
        decoder.append(DenseLayer.glorot(rng, width, input_dim, "sigmoid", dtype))
        return cls(encoder, mu_head, logvar_head, decoder)

    @classmethod
    def from_config(cls, input_dim: int, config: VaeConfig) -> "VaeModel":
        return cls.build(
            input_dim, config.latent_dim, config.hidden_width, config.hidden_layers,
            seed=config.seed, dtype=np.dtype(config.precision),
        )

    @classmethod
    def zeros(cls, input_dim: int, latent_dim: int, hidden_width: int = 16, hidden_layers: int = 2,
              dtype=np.float64) -> "VaeModel":
        model = cls.build(input_dim, latent_dim, hidden_width, hidden_layers, dtype=dtype)
        for layer in model.layers:
            layer.weights[...] = 0
            layer.bias[...] = 0
        return model

    @classmethod
    def from_layers(cls, layers: list[DenseLayer]) -> "VaeModel":
        """Inverse of `layers`: hidden encoder layers, mu head, logvar head, decoder layers."""
        hidden = (len(layers) - 3) // 2
        return cls(layers[:hidden], layers[hidden], layers[hidden + 1], layers[hidden + 2:])

    @property
    def layers(self) -> list[DenseLayer]:
        return [*self.encoder, self.mu_head, self.logvar_head, *self.decoder]

    @property
    def input_dim(self) -> int:
        return self.decoder[-1].out_features

    @property
    def latent_dim(self) -> int:
        return self.mu_head.out_features

    @property
    def dtype(self):
        return self.mu_head.weights.dtype

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases in layer order; Adam state follows the same order."""
        return [array for layer in self.layers for array in (layer.weights, layer.bias)]

    def astype(self, dtype) -> "VaeModel":
        return VaeModel.from_layers([layer.astype(dtype) for layer in self.layers])

    def copy(self) -> "VaeModel":
        return VaeModel.from_layers([layer.copy() for layer in self.layers])


def expected_parameter_count(input_dim: int, latent_dim: int, hidden_width: int, hidden_layers: int) -> int:
    def dense(n_in, n_out):
        return n_out * n_in + n_out

    hidden = dense(hidden_width, hidden_width) * (hidden_layers - 1)
    encoder = dense(input_dim, hidden_width) + hidden + 2 * dense(hidden_width, latent_dim)
    decoder = dense(latent_dim, hidden_width) + hidden + dense(hidden_width, input_dim)
    return encoder + decoder


@dataclass(frozen=True)
class LossReport:
    reconstruction: float
    kl: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.kl


class LossGradients(NamedTuple):
    x_tilde: np.ndarray
    mu: np.ndarray
    logvar: np.ndarray


def _check_width(x: np.ndarray, expected: int):
    if x.shape[-1] != expected:
        raise DimensionMismatch(network_errors[400].ShapeMismatch.value.format(expected=expected, found=x.shape[-1]))


def _run(layers: list[DenseLayer], x) -> tuple[np.ndarray, list[LayerCache]]:
    caches = []
    for layer in layers:
        x, cache = layer.forward(x)
        caches.append(cache)
    return x, caches


def _encode_with_cache(model: VaeModel, x):
    hidden, caches = _run(model.encoder, x)
    mu, mu_cache = model.mu_head.forward(hidden)
    logvar, logvar_cache = model.logvar_head.forward(hidden)
    return mu, logvar, caches, mu_cache, logvar_cache


def encode(model: VaeModel, x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=model.dtype)
    _check_width(x, model.input_dim)
    mu, logvar, *_ = _encode_with_cache(model, x)
    return mu, logvar


def reparameterize(mu, logvar, noise) -> np.ndarray:
    mu, logvar, noise = np.asarray(mu), np.asarray(logvar), np.asarray(noise)
    if not mu.shape == logvar.shape == noise.shape:
        raise DimensionMismatch(
            network_errors[400].LatentShape.value.format(shapes=(mu.shape, logvar.shape, noise.shape))
        )
    return mu + np.exp(0.5 * logvar) * noise


def decode(model: VaeModel, z) -> np.ndarray:
    z = np.asarray(z, dtype=model.dtype)
    _check_width(z, model.latent_dim)
    return _run(model.decoder, z)[0]


def _backward(layers: list[DenseLayer], caches: list[LayerCache], grad, fused_output: bool = False):
    """Backpropagate through a stack; with fused_output the grad is taken w.r.t. the last pre-activation."""
    grads = [None] * len(layers)
    for index in reversed(range(len(layers))):
        layer, cache = layers[index], caches[index]
        if fused_output and index == len(layers) - 1:
            grad, grads[index] = layer.backward_pre_activation(grad, cache)
        else:
            grad, grads[index] = layer.backward(grad, cache)
    return grad, grads


def decoder_vjp(model: VaeModel, z, grad_output) -> np.ndarray:
    """Vector-Jacobian product of the decoder: grad_output^T dG/dz."""
    z = np.asarray(z, dtype=model.dtype)
    _check_width(z, model.latent_dim)
    _, caches = _run(model.decoder, z)
    grad_z, _ = _backward(model.decoder, caches, np.asarray(grad_output, dtype=model.dtype))
    return grad_z


def vae_loss(x_tilde, x, mu, logvar) -> tuple[LossReport, LossGradients]:
    """Batch-averaged BCE and KL with gradients w.r.t. the output, mu and logvar."""
    x_tilde, x = np.atleast_2d(x_tilde), np.atleast_2d(x)
    mu, logvar = np.atleast_2d(mu), np.atleast_2d(logvar)
    batch = x.shape[0]

    clipped = np.clip(x_tilde, BCE_CLIP, 1.0 - BCE_CLIP)
    bce = -np.sum(x * np.log(clipped) + (1.0 - x) * np.log1p(-clipped)) / batch
    inside = (x_tilde >= BCE_CLIP) & (x_tilde <= 1.0 - BCE_CLIP)
    grad_x_tilde = np.where(inside, (clipped - x) / (clipped * (1.0 - clipped)), 0.0) / batch

    variance = np.exp(logvar)
    kl = -0.5 * np.sum(1.0 + logvar - mu**2 - variance) / batch
    grad_mu = mu / batch
    grad_logvar = -0.5 * (1.0 - variance) / batch

    return LossReport(float(bce), float(kl)), LossGradients(grad_x_tilde, grad_mu, grad_logvar)


def vae_gradients(model: VaeModel, x, noise) -> tuple[LossReport, list[LayerGrads]]:
    """
    Loss on a batch and its gradient for every layer, in `model.layers` order.

    The sigmoid output and the cross entropy are differentiated together, so the
    output gradient is (x_tilde - x) / batch even where the log argument is clipped.
    """
    x = np.atleast_2d(np.asarray(x, dtype=model.dtype))
    noise = np.atleast_2d(np.asarray(noise, dtype=model.dtype))
    _check_width(x, model.input_dim)
    batch = x.shape[0]

    mu, logvar, encoder_caches, mu_cache, logvar_cache = _encode_with_cache(model, x)
    z = reparameterize(mu, logvar, noise)
    x_tilde, decoder_caches = _run(model.decoder, z)
    report, loss_grads = vae_loss(x_tilde, x, mu, logvar)

    grad_z, decoder_grads = _backward(model.decoder, decoder_caches, (x_tilde - x) / batch, fused_output=True)
    grad_mu = grad_z + loss_grads.mu
    grad_logvar = grad_z * 0.5 * np.exp(0.5 * logvar) * noise + loss_grads.logvar

    grad_hidden_mu, mu_grads = model.mu_head.backward(grad_mu, mu_cache)
    grad_hidden_logvar, logvar_grads = model.logvar_head.backward(grad_logvar, logvar_cache)
    _, encoder_grads = _backward(model.encoder, encoder_caches, grad_hidden_mu + grad_hidden_logvar)

    return report, [*encoder_grads, mu_grads, logvar_grads, *decoder_grads]


def batch_loss(model: VaeModel, x, noise) -> LossReport:
    x = np.atleast_2d(np.asarray(x, dtype=model.dtype))
    mu, logvar = encode(model, x)
    z = reparameterize(mu, logvar, np.atleast_2d(np.asarray(noise, dtype=model.dtype)))
    return vae_loss(decode(model, z), x, mu, logvar)[0]


def reconstruct(model: VaeModel, x) -> np.ndarray:
    """Decode the posterior mean; no sampling noise."""
    mu, _ = encode(model, x)
    return decode(model, mu)


def sample_latent(model: VaeModel, count: int, seed: int) -> np.ndarray:
    """Decode `count` latent vectors drawn from the standard normal prior."""
    z = np.random.default_rng(seed).standard_normal((count, model.latent_dim))
    logger.debug("Decoding %d prior samples (seed %d)", count, seed)
    return decode(model, z)
