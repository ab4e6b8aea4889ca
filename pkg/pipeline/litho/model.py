"""
Optical pattern transfer: the aerial image is the mask blurred by a normalized
2-D Gaussian with zero padding outside the mask, and the resist keeps every
pixel whose intensity is strictly above the threshold.
"""
import numpy as np
import scipy.ndimage
import scipy.signal

from core.errors import InvalidArgument
from core.fields import BinaryImage, Field2D, binarize
from pipeline.litho.errors import litho_errors
from pipeline.litho.schemas import LithoParams

# Two squares side by side, as fractions of the mask size: (top, bottom, left, right).
TWO_SQUARES = (
    (0.375, 0.625, 0.1875, 0.4375),
    (0.375, 0.625, 0.5625, 0.8125),
)


def gaussian_kernel(sigma: float, radius: int) -> Field2D:
    if not sigma > 0:
        raise InvalidArgument(litho_errors[400].NonPositiveSigma.value.format(sigma=sigma))
    if radius < 1:
        raise InvalidArgument(litho_errors[400].RadiusTooSmall.value.format(radius=radius))
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-(offsets[:, np.newaxis] ** 2 + offsets[np.newaxis, :] ** 2) / (2.0 * sigma**2))
    return Field2D(kernel / kernel.sum())


def aerial_image(mask, params: LithoParams) -> Field2D:
    array = np.asarray(mask, dtype=np.float64)
    if np.any(array < 0.0) or np.any(array > 1.0):
        raise InvalidArgument(litho_errors[400].MaskOutOfRange.value)
    kernel = gaussian_kernel(params.sigma, params.kernel_radius).data

    if params.method == "fft":
        aerial = scipy.signal.fftconvolve(array, kernel, mode="same")
    else:
        aerial = scipy.ndimage.convolve(array, kernel, mode="constant", cval=0.0)
    return Field2D(np.clip(aerial, 0.0, 1.0))


def resist_threshold(aerial, t: float) -> BinaryImage:
    return binarize(aerial, threshold=t)


def litho_forward(mask, params: LithoParams) -> BinaryImage:
    return resist_threshold(aerial_image(mask, params), params.threshold)


def two_squares_mask(height: int, width: int) -> BinaryImage:
    """The two-squares target pattern scaled to the given mask size."""
    mask = np.zeros((height, width))
    for top, bottom, left, right in TWO_SQUARES:
        mask[round(top * height):round(bottom * height), round(left * width):round(right * width)] = 1.0
    return BinaryImage(mask)
