import enum

from core.errors import ExitCode, LayoutError


class Design400Errors(str, enum.Enum):
    TargetShape = "Target is {target} but the model generates paired images of {expected} values."
    MaskShape = "Mask is {mask}; expected the combined shape {expected}."
    AllRestartsFailed = "All {restarts} restarts failed: {reasons}"


class Optimizer400Errors(str, enum.Enum):
    NonFiniteStart = "Objective is not finite at the starting point."
    BoundsShape = "Bounds of length {bounds} do not match a start of length {size}."


class DesignFailed(LayoutError):
    exit_code = ExitCode.DesignFailed

    def __init__(self, message: str, restarts_log=()):
        super().__init__(message)
        self.restarts_log = list(restarts_log)


class OptimizerError(LayoutError):
    exit_code = ExitCode.DesignFailed


design_errors = {
    400: Design400Errors
}

optimizer_errors = {
    400: Optimizer400Errors
}
