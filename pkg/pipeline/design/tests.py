from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase
from scipy.special import logit

from core.errors import DimensionMismatch
from core.fields import Field2D, total_variation
from pipeline.design.errors import DesignFailed, OptimizerError
from pipeline.design.objective import DesignProblem, design_objective, generate, objective_terms
from pipeline.design.optimizer import box, lbfgsb_minimize
from pipeline.design.schemas import DesignConfig
from pipeline.design.solver import design, starting_points
from pipeline.neuralnet.tests import GradientHelper
from pipeline.neuralnet.vae import VaeModel


class DesignHelper:
    @classmethod
    def tiny_model(cls, seed=0, latent_dim=4):
        """Decoder of 4x8 paired images (two 4x4 halves)."""
        return VaeModel.build(32, latent_dim, hidden_width=16, hidden_layers=2, seed=seed, dtype=np.float64)

    @classmethod
    def constant_model(cls, image):
        """Decoder that ignores z and always emits `image`."""
        image = np.asarray(image, dtype=np.float64)
        model = VaeModel.zeros(image.size, 4)
        model.decoder[-1].bias[...] = logit(image.ravel())
        return model

    @classmethod
    def problem(cls, target, **overrides):
        return DesignProblem.for_target(Field2D(target), DesignConfig(**overrides))


class DesignConfigTests(SimpleTestCase):
    def test_problem_defaults(self):
        """Test regularization weights per problem"""
        diffusion = DesignConfig()
        self.assertEqual((diffusion.alpha, diffusion.beta), (0.1, 0.2))
        litho = DesignConfig(problem="litho")
        self.assertEqual((litho.alpha, litho.beta), (0.0, 0.0))
        self.assertEqual(DesignConfig(problem="litho", alpha=0.3).alpha, 0.3)
        self.assertEqual((diffusion.bounds, diffusion.restarts, diffusion.max_iter, diffusion.memory), (3.0, 8, 500, 10))


class LbfgsbTests(SimpleTestCase):
    def test_quadratic(self):
        """Test convergence to an interior minimizer"""
        outcome = lbfgsb_minimize(lambda z: (float((z[0] - 0.7) ** 2), 2 * (z - 0.7)), [0.0], box(3.0, 1))
        self.assertAlmostEqual(outcome.z[0], 0.7, delta=1e-8)
        self.assertTrue(outcome.converged)

    def test_active_bound(self):
        """Test a minimizer outside the box"""
        outcome = lbfgsb_minimize(lambda z: (float((z[0] - 2.0) ** 2), 2 * (z - 2.0)), [0.0], box(1.0, 1))
        self.assertEqual(outcome.z[0], 1.0)
        self.assertAlmostEqual(outcome.value, 1.0)

    def test_rosenbrock(self):
        """Test the two-dimensional Rosenbrock function from (-1.2, 1)"""
        def rosenbrock(z):
            x, y = z
            value = (1 - x) ** 2 + 100 * (y - x**2) ** 2
            grad = np.array([-2 * (1 - x) - 400 * x * (y - x**2), 200 * (y - x**2)])
            return value, grad

        outcome = lbfgsb_minimize(rosenbrock, [-1.2, 1.0], box(5.0, 2), max_iter=1000, tol=1e-10)
        np.testing.assert_allclose(outcome.z, [1.0, 1.0], atol=1e-6)

    def test_trace_and_box(self):
        """Test a non-increasing trace and evaluations inside the box"""
        visited = []

        def shifted_bowl(z):
            visited.append(z.copy())
            return float(np.sum((z - [4.0, -0.5, 0.2]) ** 2)), 2 * (z - [4.0, -0.5, 0.2])

        outcome = lbfgsb_minimize(shifted_bowl, [0.5, 0.5, 0.5], box(2.0, 3))
        self.assertTrue(all(b <= a for a, b in zip(outcome.trace, outcome.trace[1:])))
        self.assertTrue(all(np.all(np.abs(z) <= 2.0) for z in visited))

    def test_non_finite_region(self):
        """Test that NaN values return the best finite point"""
        def fenced(z):
            if z[0] > 1.5:
                return np.nan, np.full_like(z, np.nan)
            return float((z[0] - 2.0) ** 2), 2 * (z - 2.0)

        outcome = lbfgsb_minimize(fenced, [0.0], box(5.0, 1))
        self.assertTrue(np.isfinite(outcome.value))
        self.assertLessEqual(outcome.value, 4.0)
        self.assertLessEqual(outcome.z[0], 1.5)

    def test_non_finite_start(self):
        """Test a start where the objective is undefined"""
        with self.assertRaises(OptimizerError):
            lbfgsb_minimize(lambda z: (np.inf, np.zeros_like(z)), [0.0], box(1.0, 1))


class DesignObjectiveTests(SimpleTestCase):
    def test_gradient_matches_finite_differences(self):
        """Test the composite gradient on ten random decoders"""
        for seed in range(10):
            rng = np.random.default_rng(seed)
            model = DesignHelper.tiny_model(seed=seed)
            problem = DesignHelper.problem(rng.random((4, 4)), alpha=0.1, beta=0.2)
            z = rng.uniform(-1, 1, size=4)

            _, grad = design_objective(z, problem, model)
            numeric = GradientHelper.numeric_gradient(lambda: design_objective(z, problem, model)[0], z)
            self.assertLess(GradientHelper.relative_error(grad, numeric), 1e-5, msg=f"seed {seed}")

    def test_term_isolation(self):
        """Test that a perfect, volume-matched generation leaves only the TV term"""
        stripes = np.tile([0.2, 0.8, 0.2, 0.8], (4, 1))
        model = DesignHelper.constant_model(np.hstack([stripes, stripes]))
        problem = DesignHelper.problem(stripes, alpha=0.1, beta=0.2)

        terms = objective_terms(np.zeros(4), problem, model)
        self.assertLess(terms.match, 1e-20)
        self.assertLess(terms.volume, 1e-20)
        image = generate(model, np.zeros(4), problem.combined_shape)
        self.assertAlmostEqual(terms.value, 0.2 * total_variation(image), delta=1e-10)

    def test_unregularized_is_masked_error(self):
        """Test alpha = beta = 0"""
        model = DesignHelper.tiny_model(seed=3)
        target = np.random.default_rng(3).random((4, 4))
        problem = DesignHelper.problem(target, problem="litho")
        z = np.array([0.3, -0.2, 1.0, 0.0])

        image = generate(model, z, (4, 8))
        value, _ = design_objective(z, problem, model)
        self.assertAlmostEqual(value, float(np.sum((image[:, 4:] - target) ** 2)), delta=1e-12)

    def test_terms_are_non_negative(self):
        """Test the term decomposition on random points"""
        model = DesignHelper.tiny_model(seed=4)
        problem = DesignHelper.problem(np.random.default_rng(4).random((4, 4)))
        for z in np.random.default_rng(5).uniform(-3, 3, size=(20, 4)):
            terms = objective_terms(z, problem, model)
            self.assertTrue(terms.match >= 0 and terms.volume >= 0 and terms.tv >= 0)
            self.assertEqual(terms.value, terms.match + 0.1 * terms.volume + 0.2 * terms.tv)

    def test_shape_mismatch(self):
        """Test a target that does not fit the decoder"""
        problem = DesignHelper.problem(np.zeros((4, 5)))
        with self.assertRaises(DimensionMismatch):
            problem.check_model(DesignHelper.tiny_model())


class DesignTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.model = DesignHelper.tiny_model(seed=7, latent_dim=2)
        self.planted = np.array([0.5, -0.3])
        self.target = generate(self.model, self.planted, (4, 8))[:, 4:]

    def test_planted_solution(self):
        """Test that the search at least matches a target drawn from the decoder"""
        problem = DesignHelper.problem(self.target, problem="litho")
        result = design(problem, self.model, DesignConfig(problem="litho"))
        self.assertLessEqual(result.objective.match, objective_terms(self.planted, problem, self.model).match + 1e-8)

    def test_reported_objective_is_reproducible(self):
        """Test re-evaluation at z_hat"""
        problem = DesignHelper.problem(self.target)
        result = design(problem, self.model)

        again = objective_terms(result.z_hat, problem, self.model)
        self.assertAlmostEqual(result.objective.value, again.value, delta=1e-10)
        self.assertAlmostEqual(result.best_restart.value, again.value, delta=1e-10)
        self.assertTrue(np.all(np.abs(result.z_hat) <= 3.0))
        self.assertEqual(result.design.shape, (4, 4))
        self.assertEqual(result.generated_final.shape, (4, 4))

    def test_more_restarts_never_hurt(self):
        """Test monotonicity in the restart count"""
        one = design(DesignHelper.problem(self.target, restarts=1, seed=2), self.model)
        five = design(DesignHelper.problem(self.target, restarts=5, seed=2), self.model)
        self.assertLessEqual(five.objective.value, one.objective.value)
        self.assertEqual(len(five.restarts_log), 5)

    def test_starting_points(self):
        """Test clipped seeded starts with a stable prefix"""
        few = starting_points(DesignHelper.problem(self.target, restarts=2, bounds=0.5), 3)
        many = starting_points(DesignHelper.problem(self.target, restarts=6, bounds=0.5), 3)
        np.testing.assert_array_equal(few, many[:2])
        self.assertTrue(np.all(np.abs(many) <= 0.5))

    def test_threads_match_serial(self):
        """Test deterministic selection under parallel restarts"""
        problem = DesignHelper.problem(self.target, restarts=4)
        serial = design(problem, self.model, workers=1)
        threaded = design(problem, self.model, workers=4)
        np.testing.assert_array_equal(serial.z_hat, threaded.z_hat)
        self.assertEqual(serial.best_restart.index, threaded.best_restart.index)

    @patch("pipeline.design.solver.lbfgsb_minimize")
    def test_all_restarts_failing(self, mock_minimize):
        """Test the error raised when no restart produces a finite objective"""
        mock_minimize.side_effect = OptimizerError("Objective is not finite at the starting point.")
        with self.assertRaises(DesignFailed) as ctx:
            design(DesignHelper.problem(self.target, restarts=3), self.model)
        self.assertEqual(len(ctx.exception.restarts_log), 3)
        self.assertEqual(mock_minimize.call_count, 3)
