import enum


class ExitCode(enum.IntEnum):
    Usage = 2
    MissingFile = 3
    Config = 4
    DimensionMismatch = 5
    SolverDiverged = 6
    TrainingDiverged = 7
    DesignFailed = 8
    FileFormat = 9


class Field400Errors(str, enum.Enum):
    DimensionMismatch = "Field dimensions do not match: {left} vs {right}."
    NotTwoDimensional = "A field must be a two-dimensional array with at least one row and column."
    NonFinite = "A field must not contain NaN or infinite values."
    NotBinary = "A binary image may only contain the values 0 and 1."
    OddWidth = "The combined width must be even, got {width}."
    UnknownHalf = "The mask half must be 'left' or 'right', got {which!r}."


class File400Errors(str, enum.Enum):
    MalformedHeader = "Malformed header in {path}: {detail}."
    TruncatedPayload = "Truncated payload in {path}: expected {expected} bytes, found {found}."
    DimensionOverflow = "Dimensions in {path} exceed the supported range: {detail}."
    ChecksumMismatch = "Checksum mismatch in {path}: stored {stored:#010x}, computed {computed:#010x}."
    UnsupportedValueSize = "Unsupported bytes-per-value {size}; expected 4 or 8."
    MissingInput = "Input file {path} does not exist."


class Config400Errors(str, enum.Enum):
    MissingFile = "Config file {path} does not exist."
    Unreadable = "Config file {path} is not valid {kind}: {detail}"
    InvalidValue = "Invalid config: {detail}"
    UnknownSection = "Unknown override section {section!r}."


class LayoutError(Exception):
    """Base class of every error raised by the layout design toolkit."""

    exit_code = ExitCode.Usage

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class DimensionMismatch(LayoutError, ValueError):
    exit_code = ExitCode.DimensionMismatch


class InvalidArgument(LayoutError, ValueError):
    exit_code = ExitCode.Usage


class FileFormatError(LayoutError):
    exit_code = ExitCode.FileFormat


class MalformedHeader(FileFormatError):
    pass


class TruncatedPayload(FileFormatError):
    pass


class DimensionOverflow(FileFormatError):
    pass


class ChecksumMismatch(FileFormatError):
    pass


class ConfigError(LayoutError):
    exit_code = ExitCode.Config


class MissingInput(LayoutError):
    exit_code = ExitCode.MissingFile


field_errors = {
    400: Field400Errors
}

file_errors = {
    400: File400Errors
}

config_errors = {
    400: Config400Errors
}
