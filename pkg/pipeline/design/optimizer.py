"""
Bound-constrained quasi-Newton minimization on top of scipy's L-BFGS-B.

The wrapper projects every evaluated point onto the box, treats non-finite
objective values as +inf, and keeps the best finite point seen so that a
failed line search still returns something usable.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import Bounds, minimize

from core.errors import InvalidArgument
from pipeline.design.errors import OptimizerError, optimizer_errors

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class OptimizeOutcome:
    z: np.ndarray
    value: float
    iterations: int
    evaluations: int
    converged: bool
    message: str
    trace: list[float] = field(default_factory=list)


def box(bound: float, size: int) -> tuple[np.ndarray, np.ndarray]:
    return np.full(size, -bound), np.full(size, bound)


class _TrackedObjective:
    def __init__(self, objective: Objective, lower: np.ndarray, upper: np.ndarray):
        self.objective = objective
        self.lower = lower
        self.upper = upper
        self.evaluations = 0
        self.best_z = None
        self.best_value = np.inf
        self.last_z = None
        self.last_value = np.inf

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        z = np.clip(z, self.lower, self.upper)
        self.evaluations += 1
        value, grad = self.objective(z)
        value = float(value)
        grad = np.asarray(grad, dtype=np.float64)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            return np.inf, np.zeros_like(z)
        self.last_z, self.last_value = z, value
        if value < self.best_value:
            self.best_z, self.best_value = z.copy(), value
        return value, grad


def lbfgsb_minimize(objective: Objective, z0, bounds, max_iter: int = 500, tol: float = 1e-6,
                    memory: int = 10) -> OptimizeOutcome:
    """
    Minimize objective(z) -> (value, gradient) over the box `bounds = (lower, upper)`.

    Terminates when the projected gradient's infinity norm drops below `tol` or
    after `max_iter` iterations. `trace` holds the objective at each accepted
    iterate and never increases.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    lower, upper = (np.broadcast_to(np.asarray(b, dtype=np.float64), z0.shape) for b in bounds)
    if lower.shape != z0.shape:
        raise InvalidArgument(optimizer_errors[400].BoundsShape.value.format(bounds=lower.size, size=z0.size))

    tracked = _TrackedObjective(objective, lower, upper)
    start_value, _ = tracked(z0)
    if not np.isfinite(start_value):
        raise OptimizerError(optimizer_errors[400].NonFiniteStart.value)
    trace = [start_value]

    def record(zk):
        value = tracked.last_value if np.array_equal(zk, tracked.last_z) else tracked(zk)[0]
        trace.append(value)

    result = minimize(
        tracked,
        np.clip(z0, lower, upper),
        jac=True,
        method="L-BFGS-B",
        bounds=Bounds(lower, upper),
        callback=record,
        options={"maxiter": max_iter, "maxcor": memory, "gtol": tol, "ftol": np.finfo(float).eps},
    )

    finite = np.isfinite(result.fun) and result.fun <= tracked.best_value
    z, value = (np.clip(result.x, lower, upper), float(result.fun)) if finite else (tracked.best_z, tracked.best_value)
    if not finite:
        logger.warning("L-BFGS-B ended on a non-finite or worse point (%s); returning best so far", result.message)
    return OptimizeOutcome(
        z=z,
        value=value,
        iterations=int(result.nit),
        evaluations=tracked.evaluations,
        converged=bool(result.success) and finite,
        message=str(result.message),
        trace=trace,
    )
