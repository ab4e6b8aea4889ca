"""
File formats: 8-bit binary PGM for viewing, the little-endian raw record
format for datasets and phase-field dumps, and key=value sidecars.
"""
import re
import struct
from pathlib import Path

import numpy as np

from core.errors import (
    DimensionOverflow,
    InvalidArgument,
    MalformedHeader,
    TruncatedPayload,
    file_errors,
)
from core.fields import Field2D

RECORD_MAGIC = b"LVAE"
RECORD_VERSION = 1
RECORD_HEADER = struct.Struct("<4sIIIII")
MAX_SIDE = 1 << 16
MAX_VALUES = 1 << 31

PGM_HEADER = re.compile(
    rb"^P5\s(?:\s*#.*[\r\n])*"
    rb"(\d+)\s(?:\s*#.*[\r\n])*"
    rb"(\d+)\s(?:\s*#.*[\r\n])*"
    rb"(\d+)\s"
)

_VALUE_TYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}


# PGM

def write_pgm(path, img) -> None:
    """Write a field as binary P5, maxval 255, pixel = round(255 * clamp(value, 0, 1))."""
    array = np.asarray(img)
    pixels = np.rint(255.0 * np.clip(array, 0.0, 1.0)).astype(np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_pgm(path) -> Field2D:
    buffer = Path(path).read_bytes()
    match = PGM_HEADER.match(buffer)
    if match is None:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail="not a binary P5 image")
        )
    width, height, maxval = (int(g) for g in match.groups())
    if maxval != 255:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail=f"maxval {maxval} is not 255")
        )
    if not (0 < width <= MAX_SIDE and 0 < height <= MAX_SIDE):
        raise DimensionOverflow(
            file_errors[400].DimensionOverflow.value.format(path=path, detail=f"{width}x{height}")
        )

    offset = match.end()
    expected = width * height
    found = len(buffer) - offset
    if found < expected:
        raise TruncatedPayload(
            file_errors[400].TruncatedPayload.value.format(path=path, expected=expected, found=found)
        )
    pixels = np.frombuffer(buffer, dtype=np.uint8, count=expected, offset=offset)
    return Field2D(pixels.reshape(height, width) / 255.0)


# Raw records

def write_records(path, records, bytes_per_value: int = 4) -> None:
    """Write equally sized fields back to back after the LVAE header."""
    if bytes_per_value not in _VALUE_TYPES:
        raise InvalidArgument(file_errors[400].UnsupportedValueSize.value.format(size=bytes_per_value))
    arrays = [np.asarray(r) for r in records]
    if arrays:
        height, width = arrays[0].shape
    else:
        height, width = 0, 0
    for array in arrays:
        if array.shape != (height, width):
            raise InvalidArgument(
                file_errors[400].MalformedHeader.value.format(path=path, detail="records differ in shape")
            )

    value_type = _VALUE_TYPES[bytes_per_value]
    with open(path, "wb") as f:
        f.write(RECORD_HEADER.pack(RECORD_MAGIC, RECORD_VERSION, len(arrays), height, width, bytes_per_value))
        for array in arrays:
            f.write(np.ascontiguousarray(array, dtype=value_type).tobytes())


def read_record_array(path) -> np.ndarray:
    """Read every record into one array of shape (count, height, width), in stored precision."""
    buffer = Path(path).read_bytes()
    if len(buffer) < RECORD_HEADER.size:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail="file shorter than header")
        )
    magic, version, count, height, width, bytes_per_value = RECORD_HEADER.unpack_from(buffer)
    if magic != RECORD_MAGIC:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail=f"bad magic {magic!r}")
        )
    if version != RECORD_VERSION:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(path=path, detail=f"unknown version {version}")
        )
    if bytes_per_value not in _VALUE_TYPES:
        raise MalformedHeader(
            file_errors[400].MalformedHeader.value.format(
                path=path, detail=f"bytes-per-value {bytes_per_value}"
            )
        )
    if height > MAX_SIDE or width > MAX_SIDE or count * height * width > MAX_VALUES:
        raise DimensionOverflow(
            file_errors[400].DimensionOverflow.value.format(
                path=path, detail=f"{count} records of {height}x{width}"
            )
        )

    expected = count * height * width * bytes_per_value
    found = len(buffer) - RECORD_HEADER.size
    if found < expected:
        raise TruncatedPayload(
            file_errors[400].TruncatedPayload.value.format(path=path, expected=expected, found=found)
        )
    values = np.frombuffer(
        buffer, dtype=_VALUE_TYPES[bytes_per_value], count=count * height * width, offset=RECORD_HEADER.size
    )
    return values.reshape(count, height, width)


def read_records(path) -> list[Field2D]:
    return [Field2D(array) for array in read_record_array(path)]


# Sidecars

def write_sidecar(path, entries: dict) -> None:
    lines = [f"{key}={_format_value(value)}" for key, value in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_sidecar(path) -> dict[str, str]:
    entries = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise MalformedHeader(
                file_errors[400].MalformedHeader.value.format(path=path, detail=f"line {line!r}")
            )
        entries[key.strip()] = value.strip()
    return entries


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)
