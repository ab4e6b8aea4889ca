import enum

from core.errors import ExitCode, LayoutError


class Solver400Errors(str, enum.Enum):
    NonFinite = "Phase field became non-finite at step {step}."
    Overshoot = "Phase field left [-{bound}, {bound}] at step {step} (max |phi| = {peak:.4f})."
    GridMismatch = "Phase field is {shape} but the solver grid is {expected}."
    ImageOutOfRange = "Layout images must take values in [0, 1]."


class DecayFit400Errors(str, enum.Enum):
    ZeroAmplitude = "A flat interface does not decay; the decay rate is undefined for amplitude 0."
    NonMonotone = "Interface amplitude is not strictly decreasing (sample {index}: {previous:.6e} -> {current:.6e})."
    InterfaceLost = "No interface crossing found in column {column}."
    BadWavenumber = "Wavenumber {wavenumber} is not resolvable on {nx} columns."


class SolverDiverged(LayoutError):
    exit_code = ExitCode.SolverDiverged

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step

    def __reduce__(self):
        return type(self), (self.message, self.step)


class DecayFitError(LayoutError):
    exit_code = ExitCode.SolverDiverged


solver_errors = {
    400: Solver400Errors
}

decay_fit_errors = {
    400: DecayFit400Errors
}
