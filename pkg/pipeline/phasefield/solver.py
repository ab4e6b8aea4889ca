"""
Degenerate-mobility Cahn-Hilliard solver for surface diffusion.

    dphi/dt = div( 9/(4 eps) M(phi) grad mu ),   mu = -eps lap(phi) + f'(phi)

with f(phi) = (1 - phi^2)^2 / 4 and M(phi) = (1 - phi^2)^2. Time stepping is
pseudo-spectral and semi-implicit: the nonlinear flux is explicit, the B|k|^4 and
S|k|^2 stabilizers are implicit,

    phi_hat' = phi_hat + dt * N_hat / (1 + dt (S |k|^2 + B |k|^4)).

The k = 0 mode of N_hat is zero, so the evolver keeps phi_hat between steps and
mass is conserved to rounding.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from core.errors import DimensionMismatch, InvalidArgument, field_errors
from core.fields import BinaryImage, Field2D, binarize
from core.io import write_records, write_sidecar
from pipeline.phasefield.errors import SolverDiverged, solver_errors
from pipeline.phasefield.schemas import PhaseParams
from pipeline.phasefield.workspace import PHASE_BOUND, PhaseField, SpectralWorkspace

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-9


def bulk_energy(phi):
    return 0.25 * (1.0 - phi**2) ** 2


def bulk_energy_derivative(phi):
    return phi**3 - phi


def mobility(phi):
    return np.maximum((1.0 - phi**2) ** 2, 0.0)


def _check_grid(phi: np.ndarray, ws: SpectralWorkspace):
    if not ws.matches(phi.shape):
        raise DimensionMismatch(
            solver_errors[400].GridMismatch.value.format(shape=phi.shape, expected=ws.shape)
        )


def _workspace(params: PhaseParams, ws: SpectralWorkspace | None) -> SpectralWorkspace:
    return ws if ws is not None else SpectralWorkspace.for_params(params)


class HistoryPoint(NamedTuple):
    step: int
    time: float
    mass: float
    energy: float


class PhaseFieldEvolver:
    """Holds one phase field in real and spectral form and advances it in time."""

    def __init__(self, phi, params: PhaseParams, ws: SpectralWorkspace | None = None,
                 constant_mobility: bool = False):
        self.ws = _workspace(params, ws)
        self.phi = np.array(phi, dtype=np.float64)
        _check_grid(self.phi, self.ws)

        self.params = params
        self.constant_mobility = constant_mobility
        self.phi_hat = self.ws.forward(self.phi)
        self.steps = 0
        self.time = 0.0
        self._denominators = {}

    def set_params(self, params: PhaseParams):
        self.params = params
        self._denominators.clear()

    def _denominator(self, dt: float) -> np.ndarray:
        if dt not in self._denominators:
            p = self.params
            self._denominators[dt] = 1.0 + dt * (p.S * self.ws.k2 + p.B * self.ws.k4)
        return self._denominators[dt]

    def chemical_potential(self) -> np.ndarray:
        return (
            self.ws.inverse(self.params.epsilon * self.ws.k2 * self.phi_hat)
            + bulk_energy_derivative(self.phi)
        )

    def flux_divergence_spectrum(self) -> np.ndarray:
        mu_hat = self.ws.forward(self.chemical_potential())
        grad_x, grad_y = self.ws.gradient(mu_hat)
        if self.constant_mobility:
            m = self.params.mobility_scale
        else:
            m = self.params.mobility_scale * mobility(np.clip(self.phi, -1.0, 1.0))
        return self.ws.divergence_spectrum(m * grad_x, m * grad_y)

    def advance(self, dt: float | None = None) -> float:
        """One step; returns the sup-norm change divided by dt."""
        dt = self.params.dt if dt is None else dt
        previous = self.phi
        self.phi_hat = self.phi_hat + dt * self.flux_divergence_spectrum() / self._denominator(dt)
        self.phi = self.ws.inverse(self.phi_hat)
        self.steps += 1
        self.time += dt
        return float(np.max(np.abs(self.phi - previous))) / dt

    def advance_many(self, count: int, dt: float | None = None) -> tuple[float, float]:
        """Advance `count` steps; returns (peak |phi| over the segment, rate of the last step)."""
        peak = float(np.max(np.abs(self.phi)))
        rate = 0.0
        for _ in range(count):
            rate = self.advance(dt)
            peak = max(peak, float(np.max(np.abs(self.phi))))
        return peak, rate

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.phi)))

    def mass(self) -> float:
        return float(self.phi_hat[0, 0].real) * self.ws.hx * self.ws.hy

    def energy(self) -> float:
        grad_x, grad_y = self.ws.gradient(self.phi_hat)
        density = 0.5 * self.params.epsilon * (grad_x**2 + grad_y**2) + bulk_energy(self.phi)
        return float(np.sum(density)) * self.ws.hx * self.ws.hy

    def snapshot(self) -> tuple[np.ndarray, np.ndarray, int, float]:
        return self.phi.copy(), self.phi_hat.copy(), self.steps, self.time

    def restore(self, snapshot):
        phi, phi_hat, self.steps, self.time = snapshot
        self.phi, self.phi_hat = phi.copy(), phi_hat.copy()

    def history_point(self) -> HistoryPoint:
        return HistoryPoint(self.steps, self.time, self.mass(), self.energy())

    @property
    def phase(self) -> PhaseField:
        return PhaseField(self.phi)


@dataclass(frozen=True)
class EvolutionResult:
    phase: PhaseField
    steps: int
    converged: bool
    escalations: int
    params: PhaseParams
    history: list[HistoryPoint] = field(default_factory=list)

    def __iter__(self):
        yield self.phase
        yield self.steps


@dataclass(frozen=True)
class AnnealResult:
    final: BinaryImage
    smoothed: PhaseField
    evolution: EvolutionResult


def chemical_potential(phi, params: PhaseParams, ws: SpectralWorkspace | None = None) -> Field2D:
    return Field2D(PhaseFieldEvolver(phi, params, ws).chemical_potential())


def gl_energy(phi, params: PhaseParams, ws: SpectralWorkspace | None = None) -> float:
    """Ginzburg-Landau energy sum(eps/2 |grad phi|^2 + f(phi)) * cell area."""
    return PhaseFieldEvolver(phi, params, ws).energy()


def step(phi, params: PhaseParams, ws: SpectralWorkspace | None = None, step_index: int = 0,
         constant_mobility: bool = False) -> PhaseField:
    evolver = PhaseFieldEvolver(phi, params, ws, constant_mobility=constant_mobility)
    evolver.advance()
    if not evolver.is_finite():
        raise SolverDiverged(solver_errors[400].NonFinite.value.format(step=step_index + 1), step_index + 1)
    return evolver.phase


def evolve_to_steady(phi0, params: PhaseParams, ws: SpectralWorkspace | None = None) -> EvolutionResult:
    """
    Step until the sup-norm rate drops below steady_tol or max_steps is reached.

    Every check_every steps the state is checked. A non-finite field, an overshoot
    past PHASE_BOUND or an energy increase doubles B and S and restarts from the
    last accepted checkpoint, at most max_escalations times. Running out of steps
    is reported through `converged`, not raised.
    """
    evolver = PhaseFieldEvolver(phi0, params, ws)
    history = [evolver.history_point()]
    energy = history[0].energy
    checkpoint = evolver.snapshot()
    escalations = 0
    converged = False

    while evolver.steps < params.max_steps:
        count = min(params.check_every, params.max_steps - evolver.steps)
        peak, rate = evolver.advance_many(count)

        failure = None
        point = None
        if not evolver.is_finite():
            failure = solver_errors[400].NonFinite.value.format(step=evolver.steps)
        elif peak > PHASE_BOUND:
            failure = solver_errors[400].Overshoot.value.format(
                bound=PHASE_BOUND, step=evolver.steps, peak=peak
            )
        else:
            point = evolver.history_point()
            if point.energy > energy + ENERGY_SLACK * max(1.0, abs(energy)):
                if escalations < evolver.params.max_escalations:
                    failure = f"energy rose from {energy:.10g} to {point.energy:.10g} at step {evolver.steps}"
                else:
                    logger.warning(
                        "Energy rose at step %d after %d escalations; accepting", evolver.steps, escalations
                    )

        if failure is not None:
            if escalations >= evolver.params.max_escalations:
                raise SolverDiverged(failure, evolver.steps)
            escalations += 1
            evolver.restore(checkpoint)
            evolver.set_params(evolver.params.escalated())
            logger.info(
                "%s; restarting from step %d with B=%g, S=%g",
                failure, evolver.steps, evolver.params.B, evolver.params.S,
            )
            continue

        energy = point.energy
        history.append(point)
        checkpoint = evolver.snapshot()
        logger.debug("step %d: rate=%.3e energy=%.8g", evolver.steps, rate, energy)
        if rate < params.steady_tol:
            converged = True
            break

    if not converged:
        logger.info("No steady state after %d steps", evolver.steps)
    return EvolutionResult(
        phase=evolver.phase,
        steps=evolver.steps,
        converged=converged,
        escalations=escalations,
        params=evolver.params,
        history=history,
    )


def smooth_constant_mobility(img, iters: int, dt_small: float, params: PhaseParams,
                             ws: SpectralWorkspace | None = None) -> PhaseField:
    """Map a [0, 1] image to phi = 2 img - 1 and run `iters` constant-mobility steps."""
    array = np.asarray(img, dtype=np.float64)
    if array.ndim != 2:
        raise InvalidArgument(field_errors[400].NotTwoDimensional.value)
    if np.any(array < 0.0) or np.any(array > 1.0):
        raise InvalidArgument(solver_errors[400].ImageOutOfRange.value)

    evolver = PhaseFieldEvolver(PhaseField.from_image(array).data, params, ws, constant_mobility=True)
    for index in range(iters):
        evolver.advance(dt_small)
        if not evolver.is_finite():
            raise SolverDiverged(solver_errors[400].NonFinite.value.format(step=index + 1), index + 1)
    return evolver.phase


def anneal_layout(img, params: PhaseParams, ws: SpectralWorkspace | None = None) -> AnnealResult:
    """Smooth a binary layout, evolve it to steady state and binarize at phi > 0."""
    ws = _workspace(params, ws)
    smoothed = smooth_constant_mobility(img, params.smoothing_iters, params.smoothing_dt, params, ws)
    evolution = evolve_to_steady(smoothed, params, ws)
    final = binarize(evolution.phase.data, threshold=0.0)
    return AnnealResult(final=final, smoothed=smoothed, evolution=evolution)


def write_phase_checkpoint(path, phase: PhaseField, params: PhaseParams, **extra) -> Path:
    """Dump a phase field as a float64 record file with a key=value params sidecar."""
    path = Path(path)
    write_records(path, [phase.data], bytes_per_value=8)
    sidecar = path.with_name(path.name + ".params")
    write_sidecar(sidecar, {**params.model_dump(), **extra})
    return sidecar
