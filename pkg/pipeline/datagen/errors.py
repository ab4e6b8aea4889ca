import enum

from core.errors import ExitCode, LayoutError


class Datagen400Errors(str, enum.Enum):
    RetriesExhausted = "Sample {index} (seed {seed}) failed after {retries} retries: {reason}"
    TrenchOverlap = "Trench layout infeasible: {count} trenches of widths {widths} do not fit with gap {gap}"
    SplitMismatch = "Train and test indices must be disjoint and cover all {count} samples."
    TestCountTooLarge = "Test count {test_count} exceeds the dataset size {count}."
    ManifestMismatch = "Manifest of {path} describes {expected} samples but the file holds {found}."


class GenerationExhausted(LayoutError):
    exit_code = ExitCode.Config


datagen_errors = {
    400: Datagen400Errors
}
