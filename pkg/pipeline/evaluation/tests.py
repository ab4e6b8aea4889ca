import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag

from core.errors import DimensionMismatch, InvalidArgument
from core.fields import PairedSample
from pipeline.config import load_config
from pipeline.datagen.datasets import Dataset, generate_diffusion_dataset, generate_litho_dataset
from pipeline.datagen.schemas import DatagenConfig, MaskConfig, TrenchConfig
from pipeline.datagen.trenches import sample_trench_cell
from pipeline.design.objective import DesignProblem
from pipeline.design.schemas import DesignConfig
from pipeline.design.solver import design
from pipeline.evaluation.accuracy import AccuracyReport, binary_accuracy, pooled_accuracy, reconstruction_accuracy
from pipeline.evaluation.roundtrip import evaluate_designs, masked_error, roundtrip, roundtrip_evaluate
from pipeline.evaluation.shapes import (
    count_depressions,
    depression_runs,
    has_enclosed_void,
    is_trench_like,
    periodic_labels,
    solid_components,
    surface_rows,
)
from pipeline.litho.model import litho_forward, two_squares_mask
from pipeline.litho.schemas import LithoParams
from pipeline.neuralnet.training import train
from pipeline.neuralnet.vae import VaeModel
from pipeline.phasefield.schemas import PhaseParams
from pipeline.phasefield.solver import anneal_layout
from pipeline.tests import TestHelper


class BinaryAccuracyTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.image = (np.random.default_rng(0).random((8, 10)) > 0.5).astype(float)

    def test_identical_and_complement(self):
        """Test the two extremes"""
        self.assertEqual(binary_accuracy(self.image, self.image).accuracy, 1.0)
        self.assertEqual(binary_accuracy(self.image, 1 - self.image).accuracy, 0.0)

    def test_half_flipped(self):
        """Test flipping exactly half of the pixels"""
        flipped = self.image.copy()
        flipped[:4] = 1 - flipped[:4]
        report = binary_accuracy(flipped, self.image)
        self.assertEqual((report.matched, report.total), (40, 80))
        self.assertEqual(report.accuracy, 0.5)

    def test_symmetry_and_complement_invariance(self):
        """Test argument symmetry and joint complement"""
        other = (np.random.default_rng(1).random((8, 10)) > 0.3).astype(float)
        report = binary_accuracy(self.image, other)
        self.assertEqual(report, binary_accuracy(other, self.image))
        self.assertEqual(report, binary_accuracy(1 - self.image, 1 - other))

    def test_dimension_mismatch(self):
        """Test images of different sizes"""
        with self.assertRaises(DimensionMismatch):
            binary_accuracy(np.zeros((4, 4)), np.zeros((4, 5)))

    def test_non_binary_input(self):
        """Test that grayscale input is refused"""
        with self.assertRaises(InvalidArgument):
            binary_accuracy(np.full((2, 2), 0.5), np.zeros((2, 2)))


class PooledAccuracyTests(SimpleTestCase):
    def test_pooled_and_mean(self):
        """Test pooled pixel accuracy against the per-sample mean"""
        report = pooled_accuracy([AccuracyReport(3, 4, (0.75,)), AccuracyReport(1, 4, (0.25,))])
        self.assertEqual((report.matched, report.total), (4, 8))
        self.assertEqual(report.accuracy, 0.5)
        self.assertEqual(report.mean_accuracy, 0.5)
        self.assertEqual(report.per_sample, (0.75, 0.25))

    def test_empty(self):
        """Test pooling nothing"""
        with self.assertRaises(InvalidArgument):
            pooled_accuracy([])


class ReconstructionAccuracyTests(SimpleTestCase):
    def test_zero_model_predicts_void(self):
        """Test that an untrained zero model reconstructs 0.5 everywhere, binarized to void"""
        rng = np.random.default_rng(0)
        samples = [PairedSample.split((rng.random((4, 8)) > 0.5).astype(float)) for _ in range(3)]
        dataset = Dataset(samples, train=[0, 1], test=[2], seed=0)
        report = reconstruction_accuracy(VaeModel.zeros(32, 2), dataset, split="all")

        zeros = sum(int(np.count_nonzero(s.combined.data == 0)) for s in samples)
        self.assertEqual(report.matched, zeros)
        self.assertEqual(report.total, 96)
        self.assertEqual(len(report.per_sample), 3)


class ShapeTests(SimpleTestCase):
    def test_surface_rows(self):
        """Test the first solid row per column"""
        cell = TestHelper.trench_cell(16, 8, 4, [(2, 2, 5)])
        np.testing.assert_array_equal(surface_rows(cell), [4, 4, 9, 9, 4, 4, 4, 4])

    def test_depressions_wrap_around(self):
        """Test a trench split by the periodic edge"""
        cell = TestHelper.trench_cell(32, 16, 8, [(14, 4, 10)])
        self.assertEqual(depression_runs(cell), [(14, 4)])
        self.assertEqual(count_depressions(cell), 1)

    def test_two_trenches(self):
        """Test two separate depressions"""
        cell = TestHelper.trench_cell(32, 32, 8, [(2, 4, 10), (16, 6, 12)])
        self.assertEqual(count_depressions(cell), 2)
        self.assertTrue(is_trench_like(cell))

    def test_shallow_dent_is_ignored(self):
        """Test the depth tolerance"""
        cell = TestHelper.trench_cell(32, 16, 8, [(4, 4, 2)])
        self.assertEqual(count_depressions(cell), 0)
        self.assertFalse(is_trench_like(cell))

    def test_periodic_components(self):
        """Test that blobs touching both x edges form one component"""
        mask = np.zeros((6, 10), dtype=bool)
        mask[2:4, :2] = True
        mask[2:4, -2:] = True
        _, count = periodic_labels(mask)
        self.assertEqual(count, 1)
        self.assertEqual(flood_fill_count(mask), 2)

    def test_enclosed_void(self):
        """Test a buried void against an open trench"""
        cell = TestHelper.trench_cell(32, 16, 8, [(6, 4, 10)])
        self.assertFalse(has_enclosed_void(cell))
        cell[8:10, 6:10] = 1.0
        self.assertTrue(has_enclosed_void(cell))
        self.assertFalse(is_trench_like(cell))

    def test_two_slabs_are_not_trench_like(self):
        """Test a floating solid piece"""
        cell = TestHelper.trench_cell(32, 16, 16, [(6, 4, 8)])
        cell[2:5, 3:6] = 1.0
        self.assertEqual(solid_components(cell), 2)
        self.assertFalse(is_trench_like(cell))


def flood_fill_count(mask):
    """Components without the periodic join, by flood fill."""
    seen = np.zeros_like(mask)
    count = 0
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        count += 1
        stack = [start]
        while stack:
            r, c = stack.pop()
            if not (0 <= r < mask.shape[0] and 0 <= c < mask.shape[1]) or seen[r, c] or not mask[r, c]:
                continue
            seen[r, c] = True
            stack.extend([(r + 1, c), (r - 1, c), (r, c + 1), (r, c - 1)])
    return count


class RoundTripTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.config = TrenchConfig(width=32, height=64, surface_row=16, width_min=4, width_max=8,
                                   depth_min=4, depth_max=30)
        self.params = PhaseParams(nx=32, ny=64, dt=0.2, max_steps=400)
        self.cell = sample_trench_cell(2, self.config)
        self.final = anneal_layout(self.cell, self.params).final

    def test_training_pair_reproduces(self):
        """Test solver self-consistency on a regenerated pair"""
        self.assertGreater(roundtrip_evaluate(self.cell, self.final, self.params).accuracy, 0.97)

    def test_empty_design(self):
        """Test that an all-void design scores the target's void fraction"""
        report = roundtrip_evaluate(np.zeros((64, 32)), self.final, self.params)
        self.assertEqual(report.matched, int(np.count_nonzero(self.final.data == 0)))

    def test_grid_follows_design(self):
        """Test solver params regridded to the design size"""
        trip = roundtrip(self.cell, self.final, PhaseParams(dt=0.2, max_steps=50))
        self.assertEqual(trip.final.shape, (64, 32))
        self.assertGreater(trip.steps, 0)


class LithoEvaluationTests(SimpleTestCase):
    def test_litho_design_evaluation(self):
        """Test the design and print loop on a tiny mask dataset"""
        config = DatagenConfig(problem="litho", test_count=2, mask=MaskConfig(size=16, rect_max=3))
        litho = LithoParams(width=16, height=16)
        dataset = generate_litho_dataset(6, 0, litho, config)
        model = VaeModel.build(16 * 32, 3, hidden_width=16, hidden_layers=2, seed=0)
        design_config = DesignConfig(problem="litho", restarts=2, max_iter=20)

        evaluation = evaluate_designs(model, dataset, design_config, litho_params=litho)
        self.assertEqual([row.sample_id for row in evaluation.rows], dataset.test)
        self.assertEqual(evaluation.report.total, 2 * 16 * 16)
        for row in evaluation.rows:
            self.assertTrue(0.0 <= row.accuracy <= 1.0)
            self.assertEqual(row.solver_steps, 0)
            self.assertEqual(set(row.as_csv_row()), {"sample_id", "accuracy", "objective", "match", "volume", "tv",
                                                     "solver_steps"})

    def test_masked_error_of_exact_mask(self):
        """Test that a mask printing the target exactly has zero error"""
        litho = LithoParams(width=32, height=32)
        mask = np.zeros((32, 32))
        mask[8:24, 8:24] = 1.0
        printed = litho_forward(mask, litho)
        self.assertEqual(masked_error(mask, printed.data, litho), 0.0)


@tag("acceptance")
class DeskPipelineTests(SimpleTestCase):
    """Desk-scale reproduction of the diffusion workflow; takes hours."""

    def test_diffusion_pipeline(self):
        """Test reconstruction, round-trip accuracy and trench-likeness at 32x64"""
        config = load_config(settings.BASE_DIR / "config" / "desk_diffusion.toml")
        data = config.datagen
        dataset = generate_diffusion_dataset(data.count, data.seed, config.solver, data, workers=settings.LAYOUT_THREADS)
        model = VaeModel.from_config(dataset.matrix("train").shape[1], config.vae)
        train(model, dataset.matrix("train"), config.vae)

        self.assertGreaterEqual(reconstruction_accuracy(model, dataset, "test").accuracy, 0.92)
        evaluation = evaluate_designs(model, dataset, config.design, phase_params=config.solver,
                                      limit=config.eval.limit, workers=settings.LAYOUT_THREADS)
        self.assertGreaterEqual(evaluation.report.mean_accuracy, 0.88)
        self.assertGreaterEqual(evaluation.trench_like_fraction, 0.9)


@tag("acceptance")
class DeskLithoTests(SimpleTestCase):
    """Desk-scale mask design; one trained model shared by the tests."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.config = load_config(settings.BASE_DIR / "config" / "desk_litho.toml")
        data = cls.config.datagen
        cls.dataset = generate_litho_dataset(data.count, data.seed, cls.config.litho, data,
                                             workers=settings.LAYOUT_THREADS)
        cls.model = VaeModel.from_config(cls.dataset.matrix("train").shape[1], cls.config.vae)
        train(cls.model, cls.dataset.matrix("train"), cls.config.vae)

    def design_error(self, target):
        """Print errors of the target used as its own mask and of the designed mask."""
        config = self.config
        result = design(DesignProblem.for_target(target, config.design), self.model, config.design,
                        workers=settings.LAYOUT_THREADS)
        naive = masked_error(target.data, target.data, config.litho)
        return naive, masked_error(result.binary_design, target.data, config.litho)

    def test_litho_pipeline(self):
        """Test that designed masks print closer to the target than the target itself"""
        naive, designed = [], []
        for index in self.dataset.test[:self.config.eval.limit]:
            before, after = self.design_error(self.dataset.samples[index].final)
            naive.append(before)
            designed.append(after)
        self.assertLessEqual(sum(designed), 0.7 * sum(naive))

    def test_two_squares_target(self):
        """Test the designed mask for the two-squares pattern against using the pattern as its own mask"""
        size = self.config.datagen.mask.size
        naive, designed = self.design_error(two_squares_mask(size, size))
        self.assertGreater(naive, 0.0)
        self.assertLessEqual(designed, 0.7 * naive)
