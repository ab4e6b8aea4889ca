import math

import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from core.errors import InvalidArgument
from pipeline.litho.model import (
    aerial_image,
    gaussian_kernel,
    litho_forward,
    resist_threshold,
    two_squares_mask,
)
from pipeline.litho.schemas import LithoParams


def brute_force_convolution(mask, kernel):
    height, width = mask.shape
    radius = kernel.shape[0] // 2
    out = np.zeros_like(mask)
    for i in range(height):
        for j in range(width):
            total = 0.0
            for di in range(-radius, radius + 1):
                for dj in range(-radius, radius + 1):
                    ii, jj = i - di, j - dj
                    if 0 <= ii < height and 0 <= jj < width:
                        total += kernel[di + radius, dj + radius] * mask[ii, jj]
            out[i, j] = total
    return out


class LithoParamsTests(SimpleTestCase):
    def test_defaults_scale_with_width(self):
        """Test sigma = 6% of the width and radius = ceil(3 sigma)"""
        params = LithoParams()
        self.assertAlmostEqual(params.sigma, 3.84)
        self.assertEqual(params.kernel_radius, 12)

        small = LithoParams(width=32, height=32)
        self.assertAlmostEqual(small.sigma, 1.92)
        self.assertEqual(small.kernel_radius, 6)

    def test_short_radius_is_rejected(self):
        """Test radius below ceil(3 sigma)"""
        with self.assertRaises(ValidationError):
            LithoParams(sigma=2.0, kernel_radius=5)


class GaussianKernelTests(SimpleTestCase):
    def test_kernel_is_normalized(self):
        """Test that the kernel sums to one"""
        for sigma, radius in ((1.0, 3), (3.84, 12), (0.5, 1)):
            self.assertAlmostEqual(gaussian_kernel(sigma, radius).data.sum(), 1.0, delta=1e-12)

    def test_kernel_symmetry(self):
        """Test the four-fold symmetry of the kernel"""
        kernel = gaussian_kernel(2.5, 8).data
        np.testing.assert_array_equal(kernel, kernel[::-1, :])
        np.testing.assert_array_equal(kernel, kernel[:, ::-1])
        np.testing.assert_array_equal(kernel, kernel.T)

    def test_center_value(self):
        """Test the centre weight for sigma 1, radius 3"""
        total = sum(math.exp(-(i * i + j * j) / 2.0) for i in range(-3, 4) for j in range(-3, 4))
        self.assertAlmostEqual(gaussian_kernel(1.0, 3).data[3, 3], 1.0 / total, places=14)

    def test_invalid_arguments(self):
        """Test non-positive sigma and radius"""
        with self.assertRaises(InvalidArgument):
            gaussian_kernel(0.0, 3)
        with self.assertRaises(InvalidArgument):
            gaussian_kernel(1.0, 0)


class AerialImageTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.params = LithoParams(width=32, height=32, sigma=1.5, kernel_radius=5)

    def test_delta_reproduces_kernel(self):
        """Test that a single bright pixel images to the kernel"""
        mask = np.zeros((32, 32))
        mask[16, 16] = 1.0
        kernel = gaussian_kernel(1.5, 5).data

        aerial = aerial_image(mask, self.params).data
        np.testing.assert_allclose(aerial[11:22, 11:22], kernel, atol=1e-14)

    def test_all_ones_interior_and_border(self):
        """Test interior = 1 and border < 1 for a bright field"""
        aerial = aerial_image(np.ones((32, 32)), self.params).data

        np.testing.assert_allclose(aerial[5:27, 5:27], 1.0, atol=1e-12)
        self.assertLess(aerial[0, 0], 1.0)

    def test_matches_brute_force(self):
        """Test both convolution paths against an explicit quadruple loop"""
        mask = np.random.default_rng(0).random((32, 32))
        kernel = gaussian_kernel(1.5, 5).data
        expected = brute_force_convolution(mask, kernel)

        for method in ("fft", "direct"):
            params = self.params.model_copy(update={"method": method})
            np.testing.assert_allclose(aerial_image(mask, params).data, expected, atol=1e-10)

    def test_fft_and_direct_agree(self):
        """Test FFT and direct paths on 64x64 inputs"""
        mask = np.random.default_rng(1).random((64, 64))
        fft = aerial_image(mask, LithoParams(method="fft")).data
        direct = aerial_image(mask, LithoParams(method="direct")).data

        self.assertLess(np.max(np.abs(fft - direct)), 1e-10)

    def test_linearity(self):
        """Test A(m1 + m2) = A(m1) + A(m2)"""
        rng = np.random.default_rng(2)
        m1, m2 = 0.5 * rng.random((64, 64)), 0.5 * rng.random((64, 64))
        params = LithoParams()

        combined = aerial_image(m1 + m2, params).data
        separate = aerial_image(m1, params).data + aerial_image(m2, params).data
        np.testing.assert_allclose(combined, separate, atol=1e-10)

    def test_mask_out_of_range(self):
        """Test that a mask above one is refused"""
        with self.assertRaises(InvalidArgument):
            aerial_image(np.full((8, 8), 2.0), self.params)


class ResistThresholdTests(SimpleTestCase):
    def test_uniform_above_threshold(self):
        """Test that 0.6 everywhere prints fully"""
        np.testing.assert_array_equal(resist_threshold(np.full((4, 4), 0.6), 0.5).data, 1.0)

    def test_half_plane_edge(self):
        """Test that the printed edge stays within one pixel of the mask edge"""
        mask = np.zeros((64, 64))
        mask[:, 32:] = 1.0
        printed = litho_forward(mask, LithoParams()).data

        row = printed[32]
        edge = int(np.argmax(row > 0.5))
        self.assertLessEqual(abs(edge - 32), 1)

    def test_small_square_does_not_print(self):
        """Test that a square narrower than sigma vanishes"""
        params = LithoParams()
        mask = np.zeros((64, 64))
        mask[31:34, 31:34] = 1.0

        self.assertLess(aerial_image(mask, params).data.max(), 0.5)
        self.assertEqual(litho_forward(mask, params).data.sum(), 0.0)


class LithoForwardTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.params = LithoParams()
        self.target = two_squares_mask(64, 64)

    def test_two_squares_geometry(self):
        """Test the placement of the two target squares"""
        mask = self.target.data
        self.assertEqual(mask.sum(), 2 * 16 * 16)
        self.assertEqual(mask[24, 12], 1.0)
        self.assertEqual(mask[39, 51], 1.0)
        self.assertEqual(mask[24, 28], 0.0)

    def test_corners_are_rounded(self):
        """Test that every square corner pixel fails to print"""
        printed = litho_forward(self.target, self.params).data
        for row, col in ((24, 12), (24, 27), (39, 12), (39, 27), (24, 36), (24, 51), (39, 36), (39, 51)):
            self.assertEqual(printed[row, col], 0.0, msg=f"corner {(row, col)}")
        self.assertEqual(printed[32, 20], 1.0)

    def test_empty_mask(self):
        """Test that a dark mask prints nothing"""
        self.assertEqual(litho_forward(np.zeros((64, 64)), self.params).data.sum(), 0.0)

    def test_mirror_equivariance(self):
        """Test forward(mirror(m)) = mirror(forward(m))"""
        mask = (np.random.default_rng(3).random((64, 64)) > 0.6).astype(float)
        forward = litho_forward(mask, self.params).data

        np.testing.assert_array_equal(litho_forward(mask[:, ::-1], self.params).data, forward[:, ::-1])
        np.testing.assert_array_equal(litho_forward(mask[::-1, :], self.params).data, forward[::-1, :])

    def test_monotone_in_mask(self):
        """Test that adding mask pixels never removes printed pixels"""
        rng = np.random.default_rng(4)
        small = (rng.random((64, 64)) > 0.7).astype(float)
        large = np.maximum(small, (rng.random((64, 64)) > 0.7).astype(float))

        self.assertTrue(
            np.all(litho_forward(small, self.params).data <= litho_forward(large, self.params).data)
        )
