import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pipeline.neuralnet.adam import AdamState, adam_step
from pipeline.neuralnet.checkpoint import save_checkpoint
from pipeline.neuralnet.errors import (
    NetworkError,
    NonFiniteGradient,
    TrainingDiverged,
    network_errors,
    training_errors,
)
from pipeline.neuralnet.schemas import VaeConfig
from pipeline.neuralnet.vae import LossReport, VaeModel, vae_gradients

logger = logging.getLogger(__name__)


@dataclass
class TrainingHistory:
    batch_losses: list[LossReport] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def epochs(self) -> int:
        return len(self.epoch_losses)

    @property
    def best_loss(self) -> float:
        return min(self.epoch_losses) if self.epoch_losses else float("inf")


@dataclass
class TrainResult:
    model: VaeModel
    state: AdamState
    history: TrainingHistory


class _Plateau:
    def __init__(self, patience: int, min_improvement: float):
        self.patience = patience
        self.min_improvement = min_improvement
        self.best = float("inf")
        self.stale = 0

    def update(self, loss: float) -> bool:
        """Record an epoch loss; True once `patience` epochs passed without relative improvement."""
        if not np.isfinite(self.best) or loss < self.best - self.min_improvement * abs(self.best):
            self.best = loss
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience


def train(model: VaeModel, data, config: VaeConfig | None = None, checkpoint=None,
          state: AdamState | None = None) -> TrainResult:
    """
    Minibatch Adam on the VAE loss, in place on `model`.

    Epoch order and reparameterization noise come from one generator seeded with
    `config.seed`. After every epoch the model and optimizer state are written
    to `checkpoint`, so on divergence the file still holds the last good epoch.
    """
    config = config or VaeConfig()
    data = np.asarray(data, dtype=model.dtype)
    if data.ndim != 2 or data.shape[0] == 0:
        raise NetworkError(network_errors[400].EmptyDataset.value)
    if state is None:
        state = AdamState.for_config(model.parameters(), config)
    checkpoint = Path(checkpoint) if checkpoint is not None else None

    rng = np.random.default_rng(config.seed)
    history = TrainingHistory()
    plateau = _Plateau(config.patience, config.min_improvement)
    count = data.shape[0]

    for epoch in range(config.epochs):
        order = rng.permutation(count)
        total, seen = 0.0, 0
        for batch_index, start in enumerate(range(0, count, config.batch_size)):
            batch = data[order[start:start + config.batch_size]]
            noise = rng.standard_normal((batch.shape[0], model.latent_dim)).astype(model.dtype)
            report, layer_grads = vae_gradients(model, batch, noise)
            grads = [array for pair in layer_grads for array in pair]
            try:
                if not np.isfinite(report.total):
                    raise NonFiniteGradient(f"loss is {report.total}")
                adam_step(model.parameters(), grads, state)
            except NonFiniteGradient as exc:
                logger.error("Training diverged at epoch %d, batch %d: %s", epoch, batch_index, exc.message)
                raise TrainingDiverged(
                    training_errors[400].NonFiniteLoss.value.format(
                        epoch=epoch, batch=batch_index, checkpoint=checkpoint if checkpoint else "none"
                    ),
                    epoch=epoch,
                    checkpoint=checkpoint,
                ) from exc
            history.batch_losses.append(report)
            total += report.total * batch.shape[0]
            seen += batch.shape[0]

        epoch_loss = total / seen
        history.epoch_losses.append(epoch_loss)
        logger.info("Epoch %d/%d: loss %.6f", epoch + 1, config.epochs, epoch_loss)
        if checkpoint is not None:
            save_checkpoint(checkpoint, model, state)
        if plateau.update(epoch_loss):
            logger.info("Loss plateaued for %d epochs; stopping after epoch %d", config.patience, epoch + 1)
            history.stopped_early = True
            break

    return TrainResult(model, state, history)
