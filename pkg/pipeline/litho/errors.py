import enum


class Litho400Errors(str, enum.Enum):
    NonPositiveSigma = "The Gaussian sigma must be positive, got {sigma}."
    RadiusTooSmall = "The kernel radius must be at least 1, got {radius}."
    MaskOutOfRange = "Mask values must lie in [0, 1]."


litho_errors = {
    400: Litho400Errors
}
