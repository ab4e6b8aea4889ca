import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from core.errors import LayoutError
from core.fields import BinaryImage, Field2D, binarize
from pipeline.design.errors import DesignFailed, design_errors
from pipeline.design.objective import DesignProblem, ObjectiveTerms, design_objective, generate, objective_terms
from pipeline.design.optimizer import box, lbfgsb_minimize
from pipeline.design.schemas import DesignConfig
from pipeline.neuralnet.vae import VaeModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RestartRecord:
    index: int
    z0: np.ndarray
    value: float
    iterations: int
    evaluations: int
    converged: bool
    message: str
    z: np.ndarray | None = None

    @property
    def failed(self) -> bool:
        return self.z is None


@dataclass
class DesignResult:
    z_hat: np.ndarray
    objective: ObjectiveTerms
    design: Field2D
    generated_final: Field2D
    restarts_log: list[RestartRecord] = field(default_factory=list)
    threshold: float = 0.5

    @property
    def binary_design(self) -> BinaryImage:
        return binarize(self.design, self.threshold)

    @property
    def binary_final(self) -> BinaryImage:
        return binarize(self.generated_final, self.threshold)

    @property
    def best_restart(self) -> RestartRecord:
        return min((r for r in self.restarts_log if not r.failed), key=lambda r: (r.value, r.index))


def starting_points(problem: DesignProblem, latent_dim: int) -> np.ndarray:
    """Standard-normal starts clipped to the box; row i is the same for any restart count."""
    rng = np.random.default_rng(problem.seed)
    return np.clip(rng.standard_normal((problem.restarts, latent_dim)), -problem.bounds, problem.bounds)


def _restart(index: int, z0: np.ndarray, problem: DesignProblem, model: VaeModel,
             config: DesignConfig) -> RestartRecord:
    try:
        outcome = lbfgsb_minimize(
            lambda z: design_objective(z, problem, model),
            z0,
            box(problem.bounds, z0.size),
            max_iter=config.max_iter,
            tol=config.tol,
            memory=config.memory,
        )
    except LayoutError as exc:
        logger.warning("Restart %d failed: %s", index, exc.message)
        return RestartRecord(index, z0, np.inf, 0, 0, False, exc.message)
    logger.info(
        "Restart %d: objective %.6g after %d iterations (%s)", index, outcome.value, outcome.iterations, outcome.message
    )
    return RestartRecord(
        index, z0, outcome.value, outcome.iterations, outcome.evaluations, outcome.converged, outcome.message, outcome.z
    )


def design(problem: DesignProblem, model: VaeModel, config: DesignConfig | None = None,
           workers: int = 1) -> DesignResult:
    """
    Search the latent box from `problem.restarts` seeded starts and keep the best.

    Restarts share the decoder read-only and may run on threads; the winner is the
    lowest objective with ties going to the lower restart index.
    """
    config = config or DesignConfig()
    problem.check_model(model)
    model = model.astype(np.float64)
    starts = starting_points(problem, model.latent_dim)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            log = list(pool.map(lambda item: _restart(*item, problem, model, config), enumerate(starts)))
    else:
        log = [_restart(index, z0, problem, model, config) for index, z0 in enumerate(starts)]

    succeeded = [record for record in log if not record.failed and np.isfinite(record.value)]
    if not succeeded:
        reasons = "; ".join(f"#{r.index}: {r.message}" for r in log)
        raise DesignFailed(
            design_errors[400].AllRestartsFailed.value.format(restarts=len(log), reasons=reasons), log
        )
    best = min(succeeded, key=lambda r: (r.value, r.index))

    terms = objective_terms(best.z, problem, model)
    image = generate(model, best.z, problem.combined_shape)
    width = problem.target.width
    logger.info("Best restart %d of %d: %s", best.index, len(log), terms.as_dict())
    return DesignResult(
        z_hat=best.z,
        objective=terms,
        design=Field2D(image[:, :width]),
        generated_final=Field2D(image[:, width:]),
        restarts_log=log,
        threshold=config.threshold,
    )
