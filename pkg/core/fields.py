"""
Pixel-grid value types and the functionals defined on them.

Fields are stored row-major with shape (height, width). For the diffusion
problem the periodic x axis runs along the columns, so a 64x256 unit cell is a
field with 256 rows and 64 columns, and a paired sample places the initial
layout in columns [0, W) and the final shape in columns [W, 2W).
"""
from dataclasses import dataclass
from typing import Literal

import numpy as np

from core.errors import DimensionMismatch, InvalidArgument, field_errors

Half = Literal["left", "right"]


@dataclass(frozen=True, eq=False)
class Field2D:
    """Real-valued pixel grid; the array is copied and made read-only."""

    data: np.ndarray

    def __post_init__(self):
        array = np.array(self.data, dtype=np.float64)
        if array.ndim != 2 or 0 in array.shape:
            raise InvalidArgument(field_errors[400].NotTwoDimensional.value)
        if not np.all(np.isfinite(array)):
            raise InvalidArgument(field_errors[400].NonFinite.value)
        array.setflags(write=False)
        object.__setattr__(self, "data", array)
        self._validate()

    def _validate(self):
        pass

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.data
        return self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Field2D):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"{type(self).__name__}(height={self.height}, width={self.width})"

    @classmethod
    def zeros(cls, height: int, width: int):
        return cls(np.zeros((height, width)))

    @classmethod
    def ones(cls, height: int, width: int):
        return cls(np.ones((height, width)))


@dataclass(frozen=True, eq=False, repr=False)
class BinaryImage(Field2D):
    """Field whose every value is exactly 0 or 1."""

    def _validate(self):
        if not np.all((self.data == 0) | (self.data == 1)):
            raise InvalidArgument(field_errors[400].NotBinary.value)


@dataclass(frozen=True)
class PairedSample:
    """Initial layout and final shape of one datapoint."""

    initial: Field2D
    final: Field2D

    def __post_init__(self):
        _require_same_shape(self.initial, self.final)

    @property
    def combined(self) -> Field2D:
        return Field2D(np.hstack([self.initial.data, self.final.data]))

    @classmethod
    def split(cls, combined) -> "PairedSample":
        array = np.asarray(combined)
        if array.shape[1] % 2:
            raise InvalidArgument(field_errors[400].OddWidth.value.format(width=array.shape[1]))
        half = array.shape[1] // 2
        return cls(Field2D(array[:, :half]), Field2D(array[:, half:]))


def _require_same_shape(left, right):
    left_shape, right_shape = np.shape(left), np.shape(right)
    if left_shape != right_shape:
        raise DimensionMismatch(
            field_errors[400].DimensionMismatch.value.format(left=left_shape, right=right_shape)
        )


def concat_pair(initial: Field2D, final: Field2D) -> PairedSample:
    return PairedSample(initial, final)


def split_pair(combined: Field2D) -> PairedSample:
    return PairedSample.split(combined)


def half_mask(width: int, height: int, which: Half) -> BinaryImage:
    """Indicator of one half of a combined image of the given total width."""
    if width % 2:
        raise InvalidArgument(field_errors[400].OddWidth.value.format(width=width))
    if which not in ("left", "right"):
        raise InvalidArgument(field_errors[400].UnknownHalf.value.format(which=which))
    mask = np.zeros((height, width))
    if which == "left":
        mask[:, : width // 2] = 1.0
    else:
        mask[:, width // 2:] = 1.0
    return BinaryImage(mask)


def apply_mask(img, m) -> Field2D:
    _require_same_shape(img, m)
    return Field2D(np.asarray(img) * np.asarray(m))


def volume(img) -> float:
    return float(np.sum(np.asarray(img)))


def total_variation(img) -> float:
    """Anisotropic total variation over right and down neighbours, non-periodic."""
    array = np.asarray(img)
    return float(np.abs(np.diff(array, axis=1)).sum() + np.abs(np.diff(array, axis=0)).sum())


def total_variation_subgradient(img) -> np.ndarray:
    """Subgradient of total_variation with sign(0) = 0."""
    array = np.asarray(img)
    grad = np.zeros_like(array, dtype=np.float64)

    horizontal = np.sign(np.diff(array, axis=1))
    grad[:, 1:] += horizontal
    grad[:, :-1] -= horizontal

    vertical = np.sign(np.diff(array, axis=0))
    grad[1:, :] += vertical
    grad[:-1, :] -= vertical
    return grad


def binarize(img, threshold: float = 0.5) -> BinaryImage:
    """Pixel is 1 iff its value is strictly above the threshold."""
    return BinaryImage((np.asarray(img) > threshold).astype(np.float64))


def tile(fields, columns: int, gap: int = 2, fill: float = 0.5) -> Field2D:
    """Arrange equally sized fields row by row into one montage."""
    arrays = [np.asarray(f) for f in fields]
    if not arrays:
        raise InvalidArgument(field_errors[400].NotTwoDimensional.value)
    for array in arrays[1:]:
        _require_same_shape(arrays[0], array)

    height, width = arrays[0].shape
    columns = max(1, min(columns, len(arrays)))
    rows = -(-len(arrays) // columns)
    montage = np.full(
        (rows * height + (rows - 1) * gap, columns * width + (columns - 1) * gap), fill
    )
    for index, array in enumerate(arrays):
        r, c = divmod(index, columns)
        top, left = r * (height + gap), c * (width + gap)
        montage[top:top + height, left:left + width] = array
    return Field2D(montage)
