import enum


class Eval400Errors(str, enum.Enum):
    EmptySelection = "No samples selected for evaluation."
    RoundTripDiverged = "Round trip of sample {sample_id} diverged at step {step}: {reason}"
    UnknownProblem = "Cannot evaluate a dataset of problem {problem!r}; expected 'diffusion' or 'litho'."


eval_errors = {
    400: Eval400Errors
}
