import numpy as np
from django.test import SimpleTestCase, tag
from pydantic import ValidationError

from core.errors import DimensionMismatch, InvalidArgument
from core.fields import binarize
from pipeline.evaluation.shapes import has_enclosed_void
from pipeline.phasefield.errors import DecayFitError
from pipeline.phasefield.oracles import mullins_decay_fit
from pipeline.phasefield.schemas import PhaseParams
from pipeline.phasefield.solver import (
    anneal_layout,
    bulk_energy_derivative,
    chemical_potential,
    evolve_to_steady,
    gl_energy,
    mobility,
    smooth_constant_mobility,
    step,
)
from pipeline.phasefield.workspace import PhaseField, SpectralWorkspace
from pipeline.tests import TestHelper


def direct_dft_step(phi, params):
    """One solver step written with dense DFT matrices instead of FFTs."""
    ny, nx = phi.shape
    fy = np.exp(-2j * np.pi * np.outer(np.arange(ny), np.arange(ny)) / ny)
    fx = np.exp(-2j * np.pi * np.outer(np.arange(nx), np.arange(nx)) / nx)

    def forward(a):
        return fy @ a @ fx.T

    def inverse(a):
        return (fy.conj() @ a @ fx.conj().T).real / (nx * ny)

    kx = 2 * np.pi * np.fft.fftfreq(nx, d=params.hx)
    ky = 2 * np.pi * np.fft.fftfreq(ny, d=params.hy)
    kx_d, ky_d = kx.copy(), ky.copy()
    kx_d[nx // 2] = 0.0
    ky_d[ny // 2] = 0.0
    KX, KY = np.meshgrid(kx, ky)
    KXd, KYd = np.meshgrid(kx_d, ky_d)
    k2 = KX**2 + KY**2

    phi_hat = forward(phi)
    mu = inverse(params.epsilon * k2 * phi_hat) + phi**3 - phi
    mu_hat = forward(mu)
    grad_x = inverse(1j * KXd * mu_hat)
    grad_y = inverse(1j * KYd * mu_hat)
    m = 9.0 / (4.0 * params.epsilon) * np.clip(1 - np.clip(phi, -1, 1) ** 2, 0, None) ** 2
    n_hat = 1j * KXd * forward(m * grad_x) + 1j * KYd * forward(m * grad_y)
    new_hat = phi_hat + params.dt * n_hat / (1 + params.dt * (params.S * k2 + params.B * k2**2))
    return inverse(new_hat)


class PhaseParamsTests(SimpleTestCase):
    def test_defaults_derive_from_cell_size(self):
        """Test epsilon, dt and stabilizer defaults in pixel units"""
        params = PhaseParams()

        self.assertEqual((params.lx, params.ly), (64.0, 256.0))
        self.assertEqual(params.epsilon, 4.0)
        self.assertAlmostEqual(params.mobility_scale, 9.0 / 16.0)
        self.assertAlmostEqual(params.dt, 0.1 / 2.25)
        self.assertAlmostEqual(params.B, 2.25)
        self.assertAlmostEqual(params.S, 1.125)

    def test_unresolved_interface_is_rejected(self):
        """Test that epsilon below three cells is refused"""
        with self.assertRaises(ValidationError):
            PhaseParams(nx=32, ny=32, epsilon=2.0)

    def test_unstabilized_large_step_is_rejected(self):
        """Test that B = S = 0 needs dt under the explicit limit"""
        with self.assertRaises(ValidationError):
            PhaseParams(nx=32, ny=32, B=0.0, S=0.0, dt=1.0)

    def test_unknown_keys_are_rejected(self):
        """Test extra keys"""
        with self.assertRaises(ValidationError):
            PhaseParams(nx=32, ny=32, epsilonn=4.0)

    def test_escalation_doubles_stabilizers(self):
        """Test escalated copy"""
        params = TestHelper.phase_params()
        escalated = params.escalated()

        self.assertEqual(escalated.B, 2 * params.B)
        self.assertEqual(escalated.S, 2 * params.S)
        self.assertEqual(escalated.dt, params.dt)


class PointwiseTests(SimpleTestCase):
    def test_bulk_energy_derivative(self):
        """Test f'(phi) at the wells, the barrier and phi = 0.5"""
        self.assertEqual(bulk_energy_derivative(1.0), 0.0)
        self.assertEqual(bulk_energy_derivative(-1.0), 0.0)
        self.assertEqual(bulk_energy_derivative(0.0), 0.0)
        self.assertAlmostEqual(bulk_energy_derivative(0.5), -0.375)

    def test_mobility(self):
        """Test the degenerate mobility and its overshoot value"""
        self.assertEqual(mobility(0.0), 1.0)
        self.assertEqual(mobility(1.0), 0.0)
        self.assertEqual(mobility(-1.0), 0.0)
        self.assertAlmostEqual(mobility(1.05), 0.01050625, places=12)


class WorkspaceTests(SimpleTestCase):
    def test_zero_mode_is_exact(self):
        """Test that |k|^2 vanishes exactly at k = 0"""
        ws = SpectralWorkspace(16, 8, 16.0, 8.0)
        self.assertEqual(ws.k2[0, 0], 0.0)
        self.assertEqual(ws.k2.shape, (8, 9))

    def test_gradient_of_sine(self):
        """Test the spectral x derivative on a resolved mode"""
        ws = SpectralWorkspace(32, 16, 32.0, 16.0)
        x = np.arange(32)[np.newaxis, :] * np.ones((16, 1))
        k = 2 * np.pi * 3 / 32
        grad_x, grad_y = ws.gradient(ws.forward(np.sin(k * x)))

        np.testing.assert_allclose(grad_x, k * np.cos(k * x), atol=1e-12)
        np.testing.assert_allclose(grad_y, 0.0, atol=1e-12)


class ChemicalPotentialTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.params = TestHelper.phase_params(nx=64, ny=32)

    def test_uniform_field(self):
        """Test that a uniform field has mu = c^3 - c"""
        mu = chemical_potential(np.full((32, 64), 0.3), self.params)
        np.testing.assert_allclose(mu.data, 0.3**3 - 0.3, atol=1e-14)

    def test_small_sine_matches_linearisation(self):
        """Test mu against (eps k^2 - 1) phi for a small-amplitude sine"""
        amplitude = 1e-4
        k = 2 * np.pi / self.params.lx
        x = (np.arange(64) * self.params.hx)[np.newaxis, :] * np.ones((32, 1))
        phi = amplitude * np.sin(k * x)

        mu = chemical_potential(phi, self.params)
        np.testing.assert_allclose(mu.data, (self.params.epsilon * k**2 - 1) * phi, atol=1e-6)

    def test_matches_finite_difference_laplacian(self):
        """Test mu against a five-point Laplacian on a smooth field"""
        params = TestHelper.phase_params(nx=128, ny=128)
        phi = TestHelper.smooth_random_field((128, 128), seed=4)
        laplacian = (
            np.roll(phi, 1, 0) + np.roll(phi, -1, 0) + np.roll(phi, 1, 1) + np.roll(phi, -1, 1) - 4 * phi
        )
        reference = -params.epsilon * laplacian + phi**3 - phi

        mu = chemical_potential(phi, params)
        error = np.linalg.norm(mu.data - reference) / np.linalg.norm(reference)
        self.assertLess(error, 1e-2)

    def test_grid_mismatch(self):
        """Test that a field of the wrong size is rejected"""
        with self.assertRaises(DimensionMismatch):
            chemical_potential(np.zeros((16, 16)), self.params)


class StepTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.params = TestHelper.phase_params()

    def test_uniform_solid_is_fixed_point(self):
        """Test that phi = 1 everywhere does not move"""
        result = step(np.ones((32, 32)), self.params)
        np.testing.assert_allclose(result.data, 1.0, atol=1e-13)

    def test_uniform_states_are_stationary(self):
        """Test the uniform fixed points -1, 0 and 1"""
        for value in (-1.0, 0.0, 1.0):
            result = step(np.full((32, 32), value), self.params)
            np.testing.assert_allclose(result.data, value, atol=1e-13)

    def test_mass_is_conserved(self):
        """Test that one step keeps the field sum"""
        phi = np.random.default_rng(1).uniform(-0.9, 0.9, size=(32, 32))
        result = step(phi, self.params)
        self.assertAlmostEqual(result.data.sum(), phi.sum(), delta=1e-10 * abs(phi).sum())

    def test_matches_direct_dft(self):
        """Test one step against a dense-DFT implementation on random fields"""
        for seed in range(3):
            phi = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(32, 32))
            expected = direct_dft_step(phi, self.params)

            result = step(phi, self.params)
            error = np.linalg.norm(result.data - expected) / np.linalg.norm(expected)
            self.assertLess(error, 1e-10)

    def test_direct_dft_on_rectangular_grid(self):
        """Test the oracle comparison with nx != ny"""
        params = TestHelper.phase_params(nx=16, ny=24)
        phi = np.random.default_rng(7).uniform(-1.0, 1.0, size=(24, 16))

        result = step(phi, params)
        expected = direct_dft_step(phi, params)
        self.assertLess(np.linalg.norm(result.data - expected) / np.linalg.norm(expected), 1e-10)


class EvolveTests(SimpleTestCase):
    def test_uniform_field_converges_at_first_check(self):
        """Test that a uniform field is steady at the first check"""
        params = TestHelper.phase_params()
        result = evolve_to_steady(np.full((32, 32), 0.4), params)

        self.assertTrue(result.converged)
        self.assertEqual(result.steps, params.check_every)
        self.assertEqual(len(result.history), 2)

    def test_result_unpacks_to_phase_and_steps(self):
        """Test tuple-style unpacking"""
        phase, steps = evolve_to_steady(np.ones((32, 32)), TestHelper.phase_params())
        self.assertIsInstance(phase, PhaseField)
        self.assertEqual(steps, 100)

    def test_mass_and_energy_over_thousand_steps(self):
        """Test mass drift and energy dissipation at every checkpoint"""
        params = TestHelper.phase_params(max_steps=1000, steady_tol=1e-14)
        for seed in range(3):
            phi0 = TestHelper.smooth_random_field((32, 32), seed=seed, modes=6, offset=0.2, scale=0.6)
            result = evolve_to_steady(phi0, params)

            self.assertEqual(result.steps, 1000)
            self.assertAlmostEqual(result.phase.data.sum(), phi0.sum(), delta=1e-10 * np.abs(phi0).sum())
            energies = [point.energy for point in result.history]
            for before, after in zip(energies, energies[1:]):
                self.assertLessEqual(after, before + 1e-9 * abs(before))

    def test_max_steps_is_flagged_not_raised(self):
        """Test that an unconverged run returns with converged = False"""
        params = TestHelper.phase_params(max_steps=150, steady_tol=1e-14)
        phi0 = TestHelper.smooth_random_field((32, 32), seed=2, offset=0.1)

        result = evolve_to_steady(phi0, params)
        self.assertFalse(result.converged)
        self.assertEqual(result.steps, 150)

    @tag("slow")
    def test_disk_is_an_equilibrium(self):
        """Test that a pixel disk keeps its binarized shape"""
        params = TestHelper.phase_params(nx=64, ny=64, max_steps=4000, dt=0.2)
        disk = TestHelper.disk_image(64, 16)

        result = anneal_layout(disk, params)
        changed = np.count_nonzero(result.final.data != disk)
        self.assertLess(changed, 0.01 * disk.size)

    @tag("slow")
    def test_disk_shape_under_grid_refinement(self):
        """Test that doubling the resolution at fixed epsilon keeps the binarized disk"""
        disk = TestHelper.disk_image(64, 16)
        coarse = TestHelper.phase_params(nx=64, ny=64, epsilon=4.0, dt=0.1, max_steps=4000)
        fine = TestHelper.phase_params(nx=128, ny=128, lx=64.0, ly=64.0, epsilon=4.0, dt=0.1, max_steps=4000)

        coarse_final = anneal_layout(disk, coarse).final.data
        fine_phase = anneal_layout(np.kron(disk, np.ones((2, 2))), fine).evolution.phase.data
        downsampled = fine_phase.reshape(64, 2, 64, 2).mean(axis=(1, 3)) > 0.0

        changed = np.count_nonzero(downsampled != coarse_final.astype(bool))
        self.assertLess(changed, 0.005 * disk.size)

    @tag("slow")
    def test_deep_trench_pinches_off_a_void(self):
        """Test that a trench six times deeper than wide encloses a void"""
        params = TestHelper.phase_params(nx=32, ny=96, dt=0.5, max_steps=60000)
        cell = TestHelper.trench_cell(96, 32, surface_row=16, trenches=[(12, 8, 48)])
        self.assertFalse(has_enclosed_void(cell))

        result = anneal_layout(cell, params)
        self.assertTrue(has_enclosed_void(result.final))


class SmoothingTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.params = TestHelper.phase_params(nx=32, ny=64)

    def test_equilibrium_profile_barely_moves(self):
        """Test that a tanh slab changes by less than 1e-3 per smoothing step"""
        slab = TestHelper.tanh_slab(self.params)
        image = (slab + 1.0) / 2.0
        smoothed = smooth_constant_mobility(image, 1, self.params.smoothing_dt, self.params)

        self.assertLess(np.max(np.abs(smoothed.data - slab)), 1e-3)

    def test_binary_noise_keeps_mass(self):
        """Test mass conservation on binary noise"""
        image = (np.random.default_rng(5).random((64, 32)) > 0.5).astype(float)
        smoothed = smooth_constant_mobility(image, 20, self.params.smoothing_dt, self.params)

        initial = (2 * image - 1).sum()
        self.assertAlmostEqual(smoothed.data.sum(), initial, delta=1e-10 * image.size)

    def test_binary_step_is_monotone_across_interface(self):
        """Test that the smoothed interface profile is monotone"""
        image = np.zeros((64, 32))
        image[16:48] = 1.0
        smoothed = smooth_constant_mobility(image, 20, self.params.dt, self.params)

        column = smoothed.data[:32, 5]
        band = np.flatnonzero(np.abs(column) < 0.99)
        self.assertGreater(band.size, 2)
        segment = column[band.min():band.max() + 1]
        self.assertTrue(np.all(np.diff(segment) > 0))

    def test_out_of_range_image_is_rejected(self):
        """Test that image values outside [0, 1] are refused"""
        with self.assertRaises(InvalidArgument):
            smooth_constant_mobility(np.full((64, 32), 1.5), 1, 1e-3, self.params)


class EnergyTests(SimpleTestCase):
    def test_uniform_solid_has_zero_energy(self):
        """Test E(1) = 0"""
        self.assertEqual(gl_energy(np.ones((32, 32)), TestHelper.phase_params()), 0.0)

    def test_uniform_zero_is_barrier_energy(self):
        """Test E(0) = lx ly / 4"""
        params = TestHelper.phase_params(nx=32, ny=16)
        self.assertAlmostEqual(gl_energy(np.zeros((16, 32)), params), 0.25 * 32 * 16)

    def test_energy_is_non_negative(self):
        """Test positivity on a random field"""
        phi = np.random.default_rng(0).uniform(-1, 1, (32, 32))
        self.assertGreater(gl_energy(phi, TestHelper.phase_params()), 0.0)


class AnnealTests(SimpleTestCase):
    def test_flat_slab_is_unchanged(self):
        """Test that a flat slab anneals to itself"""
        params = TestHelper.phase_params(nx=32, ny=64, max_steps=2000)
        cell = TestHelper.trench_cell(64, 32, surface_row=16, trenches=[])

        result = anneal_layout(cell, params)
        np.testing.assert_array_equal(result.final.data, cell)

    def test_grid_must_match_image(self):
        """Test that the solver grid and image size must agree"""
        with self.assertRaises(DimensionMismatch):
            anneal_layout(np.zeros((16, 16)), TestHelper.phase_params())

    def test_phase_binarization_matches_image_threshold(self):
        """Test that phi > 0 is the same as (phi + 1) / 2 > 0.5"""
        phi = PhaseField(np.random.default_rng(3).uniform(-1, 1, (8, 8)))
        np.testing.assert_array_equal(
            binarize(phi.data, 0.0).data, binarize(phi.to_image(), 0.5).data
        )


class MullinsDecayTests(SimpleTestCase):
    def test_zero_amplitude_is_an_error(self):
        """Test that a flat interface has no decay rate"""
        with self.assertRaises(DecayFitError):
            mullins_decay_fit(TestHelper.phase_params(nx=64, ny=32), 1, 0.0)

    @tag("slow")
    def test_rate_scales_with_fourth_power(self):
        """Test that doubling k multiplies the decay rate by about 16"""
        params = TestHelper.phase_params(nx=128, ny=64, dt=1.0)
        slow = mullins_decay_fit(params, 1, 1.0, decay_target=0.2)
        fast = mullins_decay_fit(params, 2, 1.0, decay_target=0.2)

        self.assertTrue(np.all(np.diff(slow.amplitudes) < 0))
        self.assertTrue(np.all(np.diff(fast.amplitudes) < 0))
        self.assertGreaterEqual(fast.rate / slow.rate, 13.6)
        self.assertLessEqual(fast.rate / slow.rate, 18.4)
