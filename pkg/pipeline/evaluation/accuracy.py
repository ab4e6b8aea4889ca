from dataclasses import dataclass

import numpy as np

from core.errors import DimensionMismatch, InvalidArgument, field_errors
from core.fields import BinaryImage, binarize
from pipeline.datagen.datasets import Dataset
from pipeline.evaluation.errors import eval_errors
from pipeline.neuralnet.vae import VaeModel, reconstruct


@dataclass(frozen=True)
class AccuracyReport:
    """Pixel agreement; `accuracy` pools every pixel, `mean_accuracy` averages per sample."""

    matched: int
    total: int
    per_sample: tuple[float, ...] = ()

    @property
    def accuracy(self) -> float:
        return self.matched / self.total

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.per_sample)) if self.per_sample else self.accuracy

    def __add__(self, other: "AccuracyReport") -> "AccuracyReport":
        return AccuracyReport(self.matched + other.matched, self.total + other.total, self.per_sample + other.per_sample)


def _as_binary(img) -> BinaryImage:
    return img if isinstance(img, BinaryImage) else BinaryImage(np.asarray(img))


def binary_accuracy(pred, target) -> AccuracyReport:
    pred, target = _as_binary(pred), _as_binary(target)
    if pred.shape != target.shape:
        raise DimensionMismatch(field_errors[400].DimensionMismatch.value.format(left=pred.shape, right=target.shape))
    matched = int(np.count_nonzero(pred.data == target.data))
    total = pred.data.size
    return AccuracyReport(matched, total, (matched / total,))


def pooled_accuracy(reports) -> AccuracyReport:
    reports = list(reports)
    if not reports:
        raise InvalidArgument(eval_errors[400].EmptySelection.value)
    return sum(reports[1:], reports[0])


def reconstruction_accuracy(model: VaeModel, dataset: Dataset, split: str = "test",
                            threshold: float = 0.5, batch_size: int = 256) -> AccuracyReport:
    """Binarized noise-free reconstructions of whole paired images against their originals."""
    samples = dataset.subset(split)
    if not samples:
        raise InvalidArgument(eval_errors[400].EmptySelection.value)
    matrix = dataset.matrix(split, dtype=model.dtype)
    reports = []
    for start in range(0, len(samples), batch_size):
        rebuilt = reconstruct(model, matrix[start:start + batch_size])
        for row, sample in zip(rebuilt, samples[start:start + batch_size]):
            original = sample.combined
            predicted = binarize(row.reshape(original.shape), threshold)
            reports.append(binary_accuracy(predicted, binarize(original, threshold)))
    return pooled_accuracy(reports)
