import enum

from core.errors import ExitCode, LayoutError


class Network400Errors(str, enum.Enum):
    ShapeMismatch = "Expected {expected} input features, got {found}."
    LayerShape = "Layer weights are {weights} but the bias has {bias} entries."
    NonFiniteParameters = "Layer parameters must be finite."
    UnknownActivation = "Unknown activation {activation!r}; expected one of {choices}."
    NonFiniteGradient = "Gradient of parameter {index} contains NaN or infinite values."
    GradientShape = "Gradient {index} is {found}, parameter is {expected}."
    LatentShape = "mu, logvar and noise must share one shape, got {shapes}."
    EmptyDataset = "Cannot train on an empty dataset."


class Training400Errors(str, enum.Enum):
    NonFiniteLoss = "Loss became non-finite at epoch {epoch}, batch {batch}; last good checkpoint: {checkpoint}."


class Checkpoint400Errors(str, enum.Enum):
    BadLayerCount = "Checkpoint {path} holds {count} layers; a VAE needs an odd count of at least 5."
    BadActivation = "Checkpoint {path}: layer {index} has activation tag {tag}, expected {expected}."
    BrokenChain = "Checkpoint {path}: layer {index} takes {found} inputs but the previous layer gives {expected}."
    MomentShape = "Optimizer moments of layer {index} do not match its parameters."


class NetworkError(LayoutError, ValueError):
    exit_code = ExitCode.Usage


class NonFiniteGradient(LayoutError):
    exit_code = ExitCode.TrainingDiverged


class TrainingDiverged(LayoutError):
    exit_code = ExitCode.TrainingDiverged

    def __init__(self, message: str, epoch: int, checkpoint=None):
        super().__init__(message)
        self.epoch = epoch
        self.checkpoint = checkpoint


network_errors = {
    400: Network400Errors
}

training_errors = {
    400: Training400Errors
}

checkpoint_errors = {
    400: Checkpoint400Errors
}
