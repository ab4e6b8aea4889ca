"""
Sharp-interface check for the surface-diffusion limit.

A flat solid slab whose top interface carries a small sinusoid a0 sin(kx) relaxes
as a0 exp(-B k^4 t) under Mullins surface diffusion. With the 9/(4 eps) mobility
scaling the coefficient B is 1 in the solver's units, which is used only to pick a
run length; the fitted rate comes from the simulation.
"""
import logging
from dataclasses import dataclass

import numpy as np

from pipeline.phasefield.errors import DecayFitError, decay_fit_errors
from pipeline.phasefield.schemas import PhaseParams
from pipeline.phasefield.solver import PhaseFieldEvolver

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DecayFit:
    wavenumber: float
    rate: float
    times: np.ndarray
    amplitudes: np.ndarray


def perturbed_slab(params: PhaseParams, wavenumber: int, amplitude: float) -> np.ndarray:
    """Solid between rows ny/4 + a0 sin(kx) and 3 ny/4, tanh profiles across both interfaces."""
    x = (np.arange(params.nx) + 0.5) * params.hx
    y = (np.arange(params.ny)[:, np.newaxis] + 0.5) * params.hy
    k = 2 * np.pi * wavenumber / params.lx
    top = 0.25 * params.ly + amplitude * np.sin(k * x)[np.newaxis, :]
    bottom = 0.75 * params.ly
    distance = np.minimum(y - top, bottom - y)
    return np.tanh(distance / params.interface_width)


def interface_heights(phi: np.ndarray, params: PhaseParams) -> np.ndarray:
    """Per column, the upper zero crossing of phi located by linear interpolation."""
    upper = phi[: params.ny // 2]
    heights = np.empty(params.nx)
    for column in range(params.nx):
        profile = upper[:, column]
        crossings = np.flatnonzero((profile[:-1] <= 0.0) & (profile[1:] > 0.0))
        if crossings.size == 0:
            raise DecayFitError(decay_fit_errors[400].InterfaceLost.value.format(column=column))
        row = crossings[-1]
        fraction = -profile[row] / (profile[row + 1] - profile[row])
        heights[column] = (row + 0.5 + fraction) * params.hy
    return heights


def mode_amplitude(heights: np.ndarray, wavenumber: int) -> float:
    n = heights.size
    phase = np.exp(-2j * np.pi * wavenumber * np.arange(n) / n)
    return 2.0 * abs(np.sum(heights * phase)) / n


def mullins_decay_fit(params: PhaseParams, wavenumber: int, amplitude: float,
                      samples: int = 20, decay_target: float = 0.3, settle_fraction: float = 0.1) -> DecayFit:
    """
    Fit the exponential decay rate of a sinusoidal interface perturbation.

    `wavenumber` counts periods across lx, so k = 2 pi wavenumber / lx. The run
    covers the time over which linear theory predicts a log-amplitude drop of
    `decay_target`; the first `settle_fraction` of it lets the profile relax.
    """
    if amplitude == 0:
        raise DecayFitError(decay_fit_errors[400].ZeroAmplitude.value)
    if not 1 <= wavenumber < params.nx // 2:
        raise DecayFitError(
            decay_fit_errors[400].BadWavenumber.value.format(wavenumber=wavenumber, nx=params.nx)
        )

    k = 2 * np.pi * wavenumber / params.lx
    duration = decay_target / k**4
    settle_steps = max(1, int(round(settle_fraction * duration / params.dt)))
    sample_steps = max(1, int(round((1.0 - settle_fraction) * duration / params.dt / samples)))

    evolver = PhaseFieldEvolver(perturbed_slab(params, wavenumber, amplitude), params)
    evolver.advance_many(settle_steps)

    times, amplitudes = [], []
    for _ in range(samples + 1):
        times.append(evolver.time)
        amplitudes.append(mode_amplitude(interface_heights(evolver.phi, params), wavenumber))
        evolver.advance_many(sample_steps)
    times, amplitudes = np.array(times), np.array(amplitudes)

    for index in range(1, amplitudes.size):
        if not amplitudes[index] < amplitudes[index - 1]:
            raise DecayFitError(
                decay_fit_errors[400].NonMonotone.value.format(
                    index=index, previous=amplitudes[index - 1], current=amplitudes[index]
                )
            )

    slope, _ = np.polyfit(times, np.log(amplitudes), 1)
    logger.info("wavenumber %d: decay rate %.6e (k^4 = %.6e)", wavenumber, -slope, k**4)
    return DecayFit(wavenumber=k, rate=-slope, times=times, amplitudes=amplitudes)
