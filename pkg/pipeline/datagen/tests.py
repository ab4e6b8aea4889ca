import hashlib
from collections import Counter

import numpy as np
from django.test import SimpleTestCase
from pydantic import ValidationError

from core.errors import InvalidArgument
from pipeline.datagen.datasets import (
    generate_diffusion_dataset,
    generate_litho_dataset,
    load_dataset,
    manifest_path,
    save_dataset,
    split_indices,
)
from pipeline.datagen.errors import GenerationExhausted
from pipeline.datagen.masks import MaskSpec, control_points, render_mask, sample_mask, sample_mask_with_spec
from pipeline.datagen.schemas import DatagenConfig, MaskConfig, TrenchConfig
from pipeline.datagen.trenches import draw_trench_spec, sample_trench_cell
from pipeline.evaluation.shapes import count_depressions, is_trench_like
from pipeline.litho.model import litho_forward, two_squares_mask
from pipeline.litho.schemas import LithoParams
from pipeline.phasefield.schemas import PhaseParams
from pipeline.tests import TempDirMixin


class DatagenHelper:
    @classmethod
    def small_trench_config(cls, **overrides):
        values = dict(width=32, height=64, surface_row=16, width_min=4, width_max=8, depth_min=4, depth_max=30)
        values.update(overrides)
        return TrenchConfig(**values)

    @classmethod
    def small_datagen_config(cls, **overrides):
        return DatagenConfig(trench=cls.small_trench_config(), mask=MaskConfig(size=32), **overrides)


class TrenchConfigTests(SimpleTestCase):
    def test_inconsistent_ranges_are_rejected(self):
        """Test range validation"""
        with self.assertRaises(ValidationError):
            TrenchConfig(width_min=10, width_max=5)
        with self.assertRaises(ValidationError):
            TrenchConfig(depth_max=250)
        with self.assertRaises(ValidationError):
            TrenchConfig(width_min=2)


class SampleTrenchCellTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.config = TrenchConfig()

    def test_same_seed_same_cell(self):
        """Test determinism per seed"""
        self.assertEqual(sample_trench_cell(11, self.config), sample_trench_cell(11, self.config))

    def test_default_geometry(self):
        """Test cell size, surface row and solid bottom"""
        cell = sample_trench_cell(3, self.config).data
        self.assertEqual(cell.shape, (256, 64))
        np.testing.assert_array_equal(cell[:64], 0.0)
        np.testing.assert_array_equal(cell[-1], 1.0)

    def test_one_or_two_depressions(self):
        """Test the scanline depression count on many cells"""
        counts = Counter()
        for seed in range(1000):
            cell = sample_trench_cell(seed, self.config)
            depressions = count_depressions(cell)
            self.assertIn(depressions, (1, 2), msg=f"seed {seed}")
            self.assertTrue(is_trench_like(cell, max_depressions=2))
            counts[depressions] += 1
        self.assertGreater(counts[1], 0)
        self.assertGreater(counts[2], 0)

    def test_trenches_respect_ranges(self):
        """Test that drawn trenches stay inside the configured ranges and apart"""
        rng = np.random.default_rng(0)
        for _ in range(200):
            spec = draw_trench_spec(rng, self.config)
            for trench in spec.trenches:
                self.assertTrue(4 <= trench.width <= 20)
                self.assertTrue(8 <= trench.depth <= 120)
                self.assertTrue(0 <= trench.left and trench.right <= 64)
            if spec.count == 2:
                first, second = spec.trenches
                self.assertGreaterEqual(second.left - first.right, 2)

    def test_single_width_range(self):
        """Test a degenerate width range"""
        config = TrenchConfig(width_min=7, width_max=7)
        rng = np.random.default_rng(1)
        widths = {t.width for _ in range(100) for t in draw_trench_spec(rng, config).trenches}
        self.assertEqual(widths, {7})

    def test_infeasible_layout_exhausts_retries(self):
        """Test that trenches that cannot fit raise after the retry budget"""
        config = TrenchConfig(count_min=2, count_max=2, width_min=40, width_max=40, max_retries=5)
        with self.assertRaises(GenerationExhausted):
            sample_trench_cell(0, config)


class SampleMaskTests(SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.config = MaskConfig()

    def test_zero_edits_is_base_pattern(self):
        """Test the identity case"""
        self.assertEqual(render_mask(MaskSpec(()), self.config), two_squares_mask(64, 64))
        config = MaskConfig(min_edits=0, max_edits=0)
        self.assertEqual(sample_mask(5, config), two_squares_mask(64, 64))

    def test_masks_are_mirror_symmetric(self):
        """Test both mirror symmetries"""
        for seed in range(200):
            mask = sample_mask(seed, self.config).data
            np.testing.assert_array_equal(mask, mask[:, ::-1])
            np.testing.assert_array_equal(mask, mask[::-1, :])

    def test_edit_aspect_ratios(self):
        """Test the aspect-ratio rule over many masks"""
        for seed in range(1000):
            _, spec = sample_mask_with_spec(seed, self.config)
            self.assertTrue(2 <= len(spec.edits) <= 4)
            for edit in spec.edits:
                self.assertTrue(0.5 <= edit.aspect_ratio <= 2.0, msg=f"seed {seed}: {edit}")

    def test_duplicates_are_rare(self):
        """Test that under 5% of masks repeat"""
        digests = Counter(
            hashlib.sha256(sample_mask(seed, self.config).data.tobytes()).hexdigest() for seed in range(1000)
        )
        duplicates = sum(count - 1 for count in digests.values())
        self.assertLess(duplicates, 50)

    def test_control_points_inside_image(self):
        """Test that all control points lie on the grid"""
        for row, col in control_points(self.config):
            self.assertTrue(0 <= row < 64 and 0 <= col < 64)
        self.assertEqual(len(control_points(self.config)), 12)


class SplitTests(SimpleTestCase):
    def test_split_is_a_partition(self):
        """Test that train and test are disjoint and cover everything"""
        train, test = split_indices(10800, seed=3)
        self.assertEqual(len(test), 800)
        self.assertEqual(len(train), 10000)
        self.assertEqual(sorted(train + test), list(range(10800)))

    def test_explicit_test_count(self):
        """Test an explicit test count and the size check"""
        train, test = split_indices(10, seed=0, test_count=3)
        self.assertEqual(len(test), 3)
        with self.assertRaises(InvalidArgument):
            split_indices(10, seed=0, test_count=11)


class LithoDatasetTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.config = DatagenHelper.small_datagen_config(problem="litho", test_count=2)
        self.litho = LithoParams(width=32, height=32)

    def test_pairs_follow_forward_model(self):
        """Test that every final half is the litho output of its mask"""
        dataset = generate_litho_dataset(6, 9, self.litho, self.config)
        for sample in dataset.samples:
            self.assertEqual(sample.final, litho_forward(sample.initial, self.litho))
        self.assertEqual(dataset.shape, (32, 64))

    def test_samples_are_independent_of_count(self):
        """Test that per-index seeding keeps earlier samples fixed"""
        short = generate_litho_dataset(3, 4, self.litho, self.config)
        long = generate_litho_dataset(5, 4, self.litho, self.config)
        for a, b in zip(short.samples, long.samples[:3]):
            self.assertEqual(a.combined, b.combined)

    def test_parallel_generation_keeps_order(self):
        """Test that worker processes return samples in index order"""
        serial = generate_litho_dataset(8, 2, self.litho, self.config, workers=1)
        parallel = generate_litho_dataset(8, 2, self.litho, self.config, workers=2)
        for a, b in zip(serial.samples, parallel.samples):
            self.assertEqual(a.combined, b.combined)

    def test_save_and_load(self):
        """Test the record file and manifest"""
        dataset = generate_litho_dataset(5, 1, self.litho, self.config)
        path = self.tmp / "litho.lvae"
        save_dataset(path, dataset, config_hash="abc")

        loaded = load_dataset(path)
        self.assertEqual(loaded.train, dataset.train)
        self.assertEqual(loaded.test, dataset.test)
        self.assertEqual(loaded.problem, "litho")
        for a, b in zip(dataset.samples, loaded.samples):
            self.assertEqual(a.combined, b.combined)

    def test_regeneration_is_byte_identical(self):
        """Test determinism of the written files"""
        first, second = self.tmp / "a.lvae", self.tmp / "b.lvae"
        save_dataset(first, generate_litho_dataset(4, 7, self.litho, self.config))
        save_dataset(second, generate_litho_dataset(4, 7, self.litho, self.config))

        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(manifest_path(first).read_bytes(), manifest_path(second).read_bytes())

    def test_missing_manifest_means_all_training(self):
        """Test loading a bare record file"""
        path = self.tmp / "bare.lvae"
        save_dataset(path, generate_litho_dataset(3, 0, self.litho, self.config))
        manifest_path(path).unlink()

        loaded = load_dataset(path)
        self.assertEqual(loaded.train, [0, 1, 2])
        self.assertEqual(loaded.test, [])


class DiffusionDatasetTests(TempDirMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.config = DatagenHelper.small_datagen_config(test_count=1)
        self.params = PhaseParams(nx=32, ny=64, dt=0.2, max_steps=400)

    def test_small_dataset(self):
        """Test pairs, determinism and volume conservation of the annealed halves"""
        dataset = generate_diffusion_dataset(3, 5, self.params, self.config)
        again = generate_diffusion_dataset(3, 5, self.params, self.config)

        self.assertEqual(len(dataset), 3)
        self.assertEqual(dataset.shape, (64, 64))
        self.assertEqual(len(dataset.test), 1)
        for sample, repeat in zip(dataset.samples, again.samples):
            self.assertEqual(sample.combined, repeat.combined)
            initial, final = sample.initial.data.sum(), sample.final.data.sum()
            self.assertLess(abs(final - initial), 0.02 * initial)

    def test_grid_follows_trench_config(self):
        """Test that solver params are regridded to the cell size"""
        params = PhaseParams(dt=0.2, max_steps=100)
        dataset = generate_diffusion_dataset(1, 0, params, self.config)
        self.assertEqual(dataset.samples[0].final.shape, (64, 32))
