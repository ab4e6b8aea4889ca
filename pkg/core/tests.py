import tempfile
from pathlib import Path

import numpy as np
from django.test import TestCase

from core.errors import (
    DimensionMismatch,
    DimensionOverflow,
    ExitCode,
    InvalidArgument,
    MalformedHeader,
    TruncatedPayload,
)
from core.fields import (
    BinaryImage,
    Field2D,
    apply_mask,
    binarize,
    concat_pair,
    half_mask,
    split_pair,
    tile,
    total_variation,
    total_variation_subgradient,
    volume,
)
from core.io import (
    RECORD_HEADER,
    read_pgm,
    read_record_array,
    read_records,
    read_sidecar,
    write_pgm,
    write_records,
    write_sidecar,
)
from core.models import RunRecord
from core.utils import config_hash, record_run


class TempDirTestCase(TestCase):
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()


def neighbour_loop_tv(image):
    rows, cols = image.shape
    tv = 0.0
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                tv += abs(image[i, j + 1] - image[i, j])
            if i + 1 < rows:
                tv += abs(image[i + 1, j] - image[i, j])
    return tv


class FieldTests(TestCase):
    def test_field_is_read_only_copy(self):
        """Test that a field copies its input and rejects writes"""
        source = np.zeros((2, 3))
        field = Field2D(source)
        source[0, 0] = 5.0

        self.assertEqual(field.data[0, 0], 0.0)
        with self.assertRaises(ValueError):
            field.data[0, 0] = 1.0

    def test_field_rejects_non_finite_and_wrong_rank(self):
        """Test that NaN values and 1-D arrays are rejected"""
        with self.assertRaises(InvalidArgument):
            Field2D(np.array([[0.0, np.nan]]))
        with self.assertRaises(InvalidArgument):
            Field2D(np.zeros(4))

    def test_binary_image_rejects_fractional_values(self):
        """Test that a binary image only accepts 0 and 1"""
        BinaryImage(np.array([[0.0, 1.0]]))
        with self.assertRaises(InvalidArgument):
            BinaryImage(np.array([[0.0, 0.5]]))

    def test_concat_then_split_restores_halves(self):
        """Test that splitting a combined sample gives back both halves"""
        initial = Field2D(np.arange(6.0).reshape(2, 3))
        final = Field2D(-np.arange(6.0).reshape(2, 3))

        combined = concat_pair(initial, final).combined
        self.assertEqual(combined.shape, (2, 6))

        pair = split_pair(combined)
        self.assertEqual(pair.initial, initial)
        self.assertEqual(pair.final, final)

    def test_concat_rejects_mismatched_halves(self):
        """Test that halves of different size cannot be paired"""
        with self.assertRaises(DimensionMismatch) as ctx:
            concat_pair(Field2D.zeros(2, 3), Field2D.zeros(2, 4))
        self.assertEqual(ctx.exception.exit_code, ExitCode.DimensionMismatch)

    def test_split_rejects_odd_width(self):
        """Test that an odd combined width cannot be split"""
        with self.assertRaises(InvalidArgument):
            split_pair(Field2D.zeros(2, 5))

    def test_half_mask_covers_one_half(self):
        """Test the left and right indicator masks"""
        left = half_mask(6, 2, "left")
        right = half_mask(6, 2, "right")

        np.testing.assert_array_equal(left.data[0], [1, 1, 1, 0, 0, 0])
        np.testing.assert_array_equal(left.data + right.data, np.ones((2, 6)))
        with self.assertRaises(InvalidArgument):
            half_mask(5, 2, "left")
        with self.assertRaises(InvalidArgument):
            half_mask(6, 2, "middle")

    def test_apply_mask_and_volume(self):
        """Test that the masked volume only counts the selected half"""
        image = Field2D(np.full((4, 8), 0.5))
        masked = apply_mask(image, half_mask(8, 4, "left"))

        self.assertAlmostEqual(volume(masked), 0.5 * 16)
        with self.assertRaises(DimensionMismatch):
            apply_mask(image, half_mask(4, 4, "left"))

    def test_total_variation_of_step(self):
        """Test total variation of a single vertical edge"""
        image = np.zeros((3, 4))
        image[:, 2:] = 1.0

        self.assertEqual(total_variation(image), 3.0)
        self.assertEqual(total_variation(np.ones((5, 5))), 0.0)

    def test_total_variation_matches_neighbour_loop(self):
        """Test total variation of random 8x8 images against a double loop over neighbours"""
        for seed in range(5):
            image = np.random.default_rng(seed).random((8, 8))
            self.assertAlmostEqual(total_variation(image), neighbour_loop_tv(image), places=12)

    def test_total_variation_of_complement(self):
        """Test that an image and its complement have the same total variation"""
        rng = np.random.default_rng(7)
        for image in (rng.random((8, 8)), (rng.random((6, 10)) > 0.5).astype(float)):
            self.assertAlmostEqual(total_variation(image), total_variation(1.0 - image), places=12)

    def test_binary_mask_is_idempotent(self):
        """Test that applying a binary mask twice equals applying it once"""
        image = Field2D(np.random.default_rng(2).random((4, 8)))
        mask = half_mask(8, 4, "right")

        once = apply_mask(image, mask)
        np.testing.assert_array_equal(apply_mask(once, mask).data, once.data)

    def test_total_variation_subgradient_is_zero_on_constant(self):
        """Test that sign(0) = 0 makes the subgradient vanish on flat images"""
        np.testing.assert_array_equal(total_variation_subgradient(np.full((4, 4), 0.3)), 0.0)

    def test_total_variation_subgradient_matches_directional_change(self):
        """Test the subgradient against a one-sided finite difference away from kinks"""
        rng = np.random.default_rng(3)
        image = rng.random((5, 6))
        direction = rng.standard_normal((5, 6))
        step = 1e-7

        numeric = (total_variation(image + step * direction) - total_variation(image)) / step
        analytic = np.sum(total_variation_subgradient(image) * direction)
        self.assertAlmostEqual(numeric, analytic, places=4)

    def test_binarize_is_strict(self):
        """Test that values equal to the threshold map to 0"""
        result = binarize(np.array([[0.5, 0.50001, 0.2]]))
        np.testing.assert_array_equal(result.data, [[0.0, 1.0, 0.0]])

    def test_tile_places_fields_in_grid(self):
        """Test montage size and placement"""
        fields = [Field2D(np.full((2, 3), float(i))) for i in range(5)]
        montage = tile(fields, columns=2, gap=1, fill=-1.0)

        self.assertEqual(montage.shape, (3 * 2 + 2, 2 * 3 + 1))
        self.assertEqual(montage.data[0, 4], 1.0)
        self.assertEqual(montage.data[6, 0], 4.0)
        self.assertEqual(montage.data[6, 5], -1.0)


class PgmTests(TempDirTestCase):
    def test_pgm_quantises_to_nearest_level(self):
        """Test that read(write(x)) is within half a grey level of x"""
        values = np.linspace(0.0, 1.0, 12).reshape(3, 4)
        path = self.tmp / "image.pgm"

        write_pgm(path, Field2D(values))
        loaded = read_pgm(path)

        self.assertEqual(loaded.shape, (3, 4))
        self.assertLessEqual(np.max(np.abs(loaded.data - values)), 0.5 / 255 + 1e-12)

    def test_pgm_clamps_out_of_range_values(self):
        """Test that values outside [0, 1] are clamped"""
        path = self.tmp / "clamped.pgm"
        write_pgm(path, np.array([[-3.0, 4.0]]))

        np.testing.assert_array_equal(read_pgm(path).data, [[0.0, 1.0]])

    def test_pgm_header_with_comment(self):
        """Test that header comments are skipped"""
        path = self.tmp / "comment.pgm"
        path.write_bytes(b"P5\n# made by hand\n2 1\n255\n" + bytes([0, 255]))

        np.testing.assert_array_equal(read_pgm(path).data, [[0.0, 1.0]])

    def test_pgm_rejects_ascii_variant(self):
        """Test that a P2 file is a malformed header"""
        path = self.tmp / "ascii.pgm"
        path.write_bytes(b"P2\n2 1\n255\n0 255\n")

        with self.assertRaises(MalformedHeader) as ctx:
            read_pgm(path)
        self.assertEqual(ctx.exception.exit_code, ExitCode.FileFormat)

    def test_pgm_rejects_short_payload(self):
        """Test that a missing pixel is reported as truncation"""
        path = self.tmp / "short.pgm"
        path.write_bytes(b"P5\n2 2\n255\n" + bytes([1, 2, 3]))

        with self.assertRaises(TruncatedPayload):
            read_pgm(path)


class RecordTests(TempDirTestCase):
    def test_records_keep_float32_values(self):
        """Test that float32 records read back bit-exactly"""
        rng = np.random.default_rng(0)
        records = [rng.random((4, 6)).astype(np.float32) for _ in range(3)]
        path = self.tmp / "data.bin"

        write_records(path, records)
        loaded = read_record_array(path)

        self.assertEqual(loaded.shape, (3, 4, 6))
        self.assertEqual(loaded.dtype, np.dtype("<f4"))
        np.testing.assert_array_equal(loaded[1], records[1])

    def test_records_in_double_precision(self):
        """Test the 8-byte value variant"""
        path = self.tmp / "data64.bin"
        write_records(path, [np.full((2, 2), 1.0 / 3.0)], bytes_per_value=8)

        self.assertEqual(read_records(path)[0].data[0, 0], 1.0 / 3.0)

    def test_records_reject_bad_magic(self):
        """Test that a foreign file is refused"""
        path = self.tmp / "foreign.bin"
        path.write_bytes(RECORD_HEADER.pack(b"NOPE", 1, 0, 0, 0, 4))

        with self.assertRaises(MalformedHeader):
            read_record_array(path)

    def test_records_reject_truncation(self):
        """Test that a cut-off payload is reported"""
        path = self.tmp / "cut.bin"
        write_records(path, [np.zeros((4, 4)), np.zeros((4, 4))])
        path.write_bytes(path.read_bytes()[:-5])

        with self.assertRaises(TruncatedPayload):
            read_record_array(path)

    def test_records_reject_huge_dimensions(self):
        """Test that absurd dimensions are refused before allocation"""
        path = self.tmp / "huge.bin"
        path.write_bytes(RECORD_HEADER.pack(b"LVAE", 1, 10, 70000, 70000, 4))

        with self.assertRaises(DimensionOverflow):
            read_record_array(path)


class SidecarTests(TempDirTestCase):
    def test_sidecar_preserves_order_and_values(self):
        """Test key=value sidecars"""
        path = self.tmp / "data.manifest"
        write_sidecar(path, {"problem": "diffusion", "seed": 7, "split": [1, 2, 3], "alpha": 0.1})

        entries = read_sidecar(path)
        self.assertEqual(list(entries), ["problem", "seed", "split", "alpha"])
        self.assertEqual(entries["split"], "1,2,3")
        self.assertEqual(float(entries["alpha"]), 0.1)


class RunLedgerTests(TestCase):
    def test_config_hash_ignores_key_order(self):
        """Test that equivalent configs hash identically"""
        self.assertEqual(config_hash({"a": 1, "b": [2, 3]}), config_hash({"b": [2, 3], "a": 1}))
        self.assertNotEqual(config_hash({"a": 1}), config_hash({"a": 2}))

    def test_record_run_stores_entry(self):
        """Test that a finished command is written to the ledger"""
        record = record_run("train", {"seed": 1}, {"epochs": 3}, ["model.lvnn"], seed=1)

        self.assertIsNotNone(record)
        stored = RunRecord.objects.get(pk=record.pk)
        self.assertEqual(stored.command, "train")
        self.assertEqual(stored.outputs, ["model.lvnn"])
        self.assertEqual(stored.status, RunRecord.Status.SUCCEEDED)
