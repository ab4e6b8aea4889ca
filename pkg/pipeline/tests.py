import tempfile
from pathlib import Path

import numpy as np

from pipeline.phasefield.schemas import PhaseParams


class TestHelper:
    @classmethod
    def phase_params(cls, nx=32, ny=32, **overrides):
        return PhaseParams(nx=nx, ny=ny, **overrides)

    @classmethod
    def smooth_random_field(cls, shape, seed=0, modes=3, offset=0.0, scale=0.5):
        """Sum of a few low Fourier modes with random phases, periodic on the grid."""
        rng = np.random.default_rng(seed)
        ny, nx = shape
        y, x = np.mgrid[0:ny, 0:nx]
        field = np.zeros(shape)
        for _ in range(modes):
            mx, my = rng.integers(0, 4, size=2)
            phase = rng.uniform(0, 2 * np.pi)
            field += np.cos(2 * np.pi * (mx * x / nx + my * y / ny) + phase)
        return offset + scale * field / modes

    @classmethod
    def tanh_slab(cls, params, top=0.25, bottom=0.75):
        y = (np.arange(params.ny)[:, np.newaxis] + 0.5) * params.hy
        distance = np.minimum(y - top * params.ly, bottom * params.ly - y)
        return np.tanh(distance / params.interface_width) * np.ones((1, params.nx))

    @classmethod
    def trench_cell(cls, height, width, surface_row, trenches):
        """Binary cell: solid below surface_row, minus (left column, width, depth) trenches."""
        cell = np.zeros((height, width))
        cell[surface_row:, :] = 1.0
        for left, trench_width, depth in trenches:
            columns = np.arange(left, left + trench_width) % width
            cell[surface_row:surface_row + depth, columns] = 0.0
        return cell

    @classmethod
    def disk_image(cls, size, radius):
        y, x = np.mgrid[0:size, 0:size] + 0.5
        return ((x - size / 2) ** 2 + (y - size / 2) ** 2 < radius**2).astype(float)


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()
