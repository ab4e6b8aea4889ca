"""
Round-trip evaluation: a designed initial layout goes through the forward
process (smoothing plus surface diffusion, or the lithography model) and the
binarized outcome is compared with the target final shape.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from core.errors import InvalidArgument
from core.fields import BinaryImage, binarize
from core.parallel import map_ordered
from pipeline.datagen.datasets import Dataset
from pipeline.design.objective import DesignProblem, ObjectiveTerms
from pipeline.design.schemas import DesignConfig
from pipeline.design.solver import design
from pipeline.evaluation.accuracy import AccuracyReport, binary_accuracy, pooled_accuracy
from pipeline.evaluation.errors import eval_errors
from pipeline.evaluation.shapes import is_trench_like
from pipeline.litho.model import litho_forward
from pipeline.litho.schemas import LithoParams
from pipeline.neuralnet.vae import VaeModel
from pipeline.phasefield.errors import SolverDiverged
from pipeline.phasefield.schemas import PhaseParams
from pipeline.phasefield.solver import AnnealResult, anneal_layout

logger = logging.getLogger(__name__)


@dataclass
class RoundTrip:
    report: AccuracyReport
    final: BinaryImage
    steps: int = 0
    converged: bool = True


def _regrid(params: PhaseParams, shape) -> PhaseParams:
    height, width = shape
    if (params.ny, params.nx) != (height, width):
        return params.for_grid(width, height)
    return params


def roundtrip(design_image, target, phase_params: PhaseParams, sample_id=None) -> RoundTrip:
    target = binarize(target)
    params = _regrid(phase_params, target.shape)
    try:
        annealed: AnnealResult = anneal_layout(binarize(design_image), params)
    except SolverDiverged as exc:
        raise SolverDiverged(
            eval_errors[400].RoundTripDiverged.value.format(sample_id=sample_id, step=exc.step, reason=exc.message),
            exc.step,
        ) from exc
    return RoundTrip(
        binary_accuracy(annealed.final, target),
        annealed.final,
        annealed.evolution.steps,
        annealed.evolution.converged,
    )


def roundtrip_evaluate(design_image, target, phase_params: PhaseParams, sample_id=None) -> AccuracyReport:
    """Smooth, evolve to steady state, binarize and compare with the target."""
    return roundtrip(design_image, target, phase_params, sample_id).report


def litho_roundtrip(mask, target, litho_params: LithoParams) -> RoundTrip:
    printed = litho_forward(binarize(mask), litho_params)
    return RoundTrip(binary_accuracy(printed, binarize(target)), printed)


def masked_error(mask, target, litho_params: LithoParams) -> float:
    """Squared error between the printed pattern of `mask` and the target."""
    printed = litho_forward(binarize(mask), litho_params)
    return float(np.sum((printed.data - np.asarray(target)) ** 2))


def _roundtrip_job(args) -> RoundTrip:
    sample_id, design_image, target, phase_params = args
    return roundtrip(design_image, target, phase_params, sample_id)


@dataclass
class EvaluationRow:
    sample_id: int
    accuracy: float
    objective: ObjectiveTerms
    solver_steps: int
    converged: bool
    trench_like: bool

    def as_csv_row(self) -> dict:
        terms = self.objective
        return {
            "sample_id": self.sample_id,
            "accuracy": self.accuracy,
            "objective": terms.value,
            "match": terms.match,
            "volume": terms.volume,
            "tv": terms.tv,
            "solver_steps": self.solver_steps,
        }


@dataclass
class Evaluation:
    rows: list[EvaluationRow] = field(default_factory=list)
    report: AccuracyReport | None = None

    @property
    def trench_like_fraction(self) -> float:
        return sum(row.trench_like for row in self.rows) / len(self.rows)


def evaluate_designs(model: VaeModel, dataset: Dataset, design_config: DesignConfig,
                     phase_params: PhaseParams | None = None, litho_params: LithoParams | None = None,
                     split: str = "test", limit: int | None = None, workers: int = 1) -> Evaluation:
    """
    Design an initial layout for every target final shape of the split, push the
    design through the forward process and score it against the target.
    """
    if dataset.problem not in ("diffusion", "litho"):
        raise InvalidArgument(eval_errors[400].UnknownProblem.value.format(problem=dataset.problem))
    indices = dataset.train if split == "train" else dataset.test if split == "test" else range(len(dataset))
    indices = list(indices)[:limit]
    if not indices:
        raise InvalidArgument(eval_errors[400].EmptySelection.value)

    results = []
    for sample_id in indices:
        target = dataset.samples[sample_id].final
        result = design(DesignProblem.for_target(target, design_config), model, design_config, workers=workers)
        logger.info("Sample %d: design objective %.6g", sample_id, result.objective.value)
        results.append((sample_id, target, result))

    if dataset.problem == "diffusion":
        jobs = [(sample_id, result.binary_design, target, phase_params or PhaseParams())
                for sample_id, target, result in results]
        trips = map_ordered(_roundtrip_job, jobs, workers)
    else:
        litho_params = (litho_params or LithoParams()).for_mask(dataset.shape[1] // 2, dataset.shape[0])
        trips = [litho_roundtrip(result.binary_design, target, litho_params) for _, target, result in results]

    rows = [
        EvaluationRow(
            sample_id=sample_id,
            accuracy=trip.report.accuracy,
            objective=result.objective,
            solver_steps=trip.steps,
            converged=trip.converged,
            trench_like=dataset.problem == "diffusion" and is_trench_like(result.binary_design),
        )
        for (sample_id, _, result), trip in zip(results, trips)
    ]
    return Evaluation(rows, pooled_accuracy(trip.report for trip in trips))
