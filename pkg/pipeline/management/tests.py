import csv
import json
from io import StringIO

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from core.errors import ExitCode
from core.io import read_pgm, read_sidecar, write_pgm
from core.models import RunRecord
from pipeline.config import load_config, snapshot_path
from pipeline.datagen.datasets import load_dataset, manifest_path
from pipeline.evaluation.roundtrip import masked_error
from pipeline.litho.model import litho_forward, two_squares_mask
from pipeline.management.commands.evaluate import COLUMNS
from pipeline.neuralnet.checkpoint import load_model
from pipeline.tests import TempDirMixin, TestHelper

TINY_CONFIG = """
[solver]
nx = 16
ny = 32
max_steps = 100

[litho]
width = 16
height = 16

[datagen]
problem = "diffusion"
count = 4
seed = 1
test_count = 1

[datagen.trench]
width = 16
height = 32
surface_row = 8
width_min = 3
width_max = 5
depth_min = 3
depth_max = 12

[datagen.mask]
size = 16
rect_max = 3

[vae]
hidden_width = 8
hidden_layers = 1
latent_dim = 2
epochs = 2
batch_size = 2
precision = "float64"

[design]
restarts = 2
max_iter = 10
"""


class CommandHelper:
    @classmethod
    def call(cls, name, *args):
        out = StringIO()
        call_command(name, *args, "--threads", "1", stdout=out, stderr=StringIO())
        return out.getvalue()


class CommandTestCase(TempDirMixin, TestCase):
    def setUp(self):
        super().setUp()
        self.config = self.tmp / "tiny.toml"
        self.config.write_text(TINY_CONFIG, encoding="utf-8")

    def call(self, name, *args):
        return CommandHelper.call(name, "--config", str(self.config), *args)

    def dataset(self, name="data.lvae", *args):
        path = self.tmp / name
        self.call("gen_data", "--out", str(path), *args)
        return path

    def model(self, data, name="model.lvnn"):
        path = self.tmp / name
        self.call("train", "--data", str(data), "--out", str(path))
        return path


class GenDataCommandTests(CommandTestCase):
    def test_same_seed_gives_identical_files(self):
        """Test that generating twice with one seed writes identical files"""
        first = self.dataset("a.lvae", "--seed", "3")
        second = self.dataset("b.lvae", "--seed", "3")

        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(manifest_path(first).read_bytes(), manifest_path(second).read_bytes())
        self.assertEqual(load_dataset(first).shape, (32, 32))

    def test_flags_override_config(self):
        """Test that --count and --problem win over the config file"""
        path = self.dataset("litho.lvae", "--problem", "litho", "--count", "6")
        dataset = load_dataset(path)
        self.assertEqual((len(dataset), dataset.problem, dataset.shape), (6, "litho", (16, 32)))

    def test_snapshot_and_ledger(self):
        """Test the resolved config snapshot and the run record"""
        path = self.dataset("data.lvae", "--seed", "5")

        snapshot = json.loads(snapshot_path(path).read_text(encoding="utf-8"))
        self.assertEqual(snapshot["command"], "gen_data")
        self.assertEqual(snapshot["seed"], 5)
        self.assertEqual(snapshot["config"]["datagen"]["seed"], 5)
        self.assertEqual(snapshot["config"]["solver"]["epsilon"], 4.0)

        reloaded = load_config(snapshot_path(path))
        self.assertEqual(reloaded.datagen.seed, 5)
        record = RunRecord.objects.get(command="gen_data")
        self.assertEqual(record.status, RunRecord.Status.SUCCEEDED)
        self.assertIn(str(path), record.outputs)


class TrainCommandTests(CommandTestCase):
    def test_train_then_reconstruct(self):
        """Test a one-config training run followed by the reconstruction montage"""
        data = self.dataset()
        model_path = self.model(data)
        model = load_model(model_path)
        self.assertEqual((model.input_dim, model.latent_dim), (32 * 32, 2))

        montage = self.tmp / "recon.pgm"
        output = self.call("reconstruct", "--model", str(model_path), "--data", str(data), "--split", "all",
                           "--out", str(montage))
        self.assertEqual(read_pgm(montage).shape, (2 * 32 + 2, 4 * 32 + 3 * 2))
        self.assertIn("Reconstruction accuracy", output)

    def test_latent_dim_flag(self):
        """Test that --latent-dim reaches the model"""
        data = self.dataset()
        path = self.tmp / "wide.lvnn"
        self.call("train", "--data", str(data), "--latent-dim", "3", "--epochs", "1", "--out", str(path))
        self.assertEqual(load_model(path).latent_dim, 3)

    def test_sample(self):
        """Test decoding prior samples into a montage"""
        model_path = self.model(self.dataset())
        out = self.tmp / "samples.pgm"
        self.call("sample", "--model", str(model_path), "--height", "32", "--count", "3", "--out", str(out))
        self.assertEqual(read_pgm(out).shape, (32, 3 * 32 + 2 * 2))


class DesignCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        data = self.dataset()
        self.model_path = self.model(data)
        self.target = self.tmp / "target.pgm"
        write_pgm(self.target, load_dataset(data).samples[0].final)

    def test_design_emits_layout_and_report(self):
        """Test the designed layout, generated final shape and report"""
        out = self.tmp / "design.pgm"
        self.call("design", "--model", str(self.model_path), "--target", str(self.target),
                  "--alpha", "0.1", "--beta", "0.2", "--out", str(out))

        self.assertEqual(read_pgm(out).shape, (32, 16))
        self.assertEqual(read_pgm(self.tmp / "design.final.pgm").shape, (32, 16))
        report = read_sidecar(self.tmp / "design.report")
        self.assertEqual(int(report["restarts"]), 2)
        self.assertEqual(len(report["z_hat"].split(",")), 2)
        snapshot = json.loads(snapshot_path(out).read_text(encoding="utf-8"))
        self.assertEqual((snapshot["config"]["design"]["alpha"], snapshot["config"]["design"]["beta"]), (0.1, 0.2))

    def test_design_with_roundtrip(self):
        """Test the optional forward pass of the designed layout"""
        out = self.tmp / "design.pgm"
        output = self.call("design", "--model", str(self.model_path), "--target", str(self.target),
                           "--roundtrip", "--out", str(out))
        self.assertIn("Round-trip accuracy", output)
        self.assertTrue((self.tmp / "design.roundtrip.pgm").exists())
        self.assertIn("roundtrip_accuracy", read_sidecar(self.tmp / "design.report"))

    def test_target_of_wrong_size(self):
        """Test the dimension-mismatch exit code"""
        small = self.tmp / "small.pgm"
        write_pgm(small, np.zeros((8, 8)))
        with self.assertRaises(CommandError) as ctx:
            self.call("design", "--model", str(self.model_path), "--target", str(small), "--out",
                      str(self.tmp / "d.pgm"))
        self.assertEqual(ctx.exception.returncode, ExitCode.DimensionMismatch)
        self.assertEqual(RunRecord.objects.filter(command="design", status=RunRecord.Status.FAILED).count(), 1)


class SimulateCommandTests(CommandTestCase):
    def test_history_csv(self):
        """Test the final shape and the step, time, mass and energy history"""
        layout = self.tmp / "cell.pgm"
        write_pgm(layout, TestHelper.trench_cell(32, 16, 8, [(5, 4, 10)]))
        out = self.tmp / "final.pgm"
        self.call("simulate", "--input", str(layout), "--dt", "0.2", "--out", str(out), "--phase",
                  str(self.tmp / "phase.raw"))

        self.assertEqual(read_pgm(out).shape, (32, 16))
        text = (self.tmp / "final.csv").read_text(encoding="utf-8")
        self.assertNotIn("\r", text)
        rows = list(csv.DictReader(text.splitlines()))
        self.assertEqual(list(rows[0]), ["step", "time", "mass", "energy"])
        masses = [float(row["mass"]) for row in rows]
        self.assertLess(max(masses) - min(masses), 1e-8 * max(1.0, abs(masses[0])))
        energies = [float(row["energy"]) for row in rows]
        self.assertLessEqual(energies[-1], energies[0])
        steps = pd.read_csv(self.tmp / "final.csv")["step"]
        self.assertEqual(steps.iloc[0], 0)
        self.assertTrue(steps.is_monotonic_increasing)
        self.assertEqual(float(read_sidecar(self.tmp / "phase.raw.params")["dt"]), 0.2)


class LithoCommandTests(CommandTestCase):
    def test_printed_pattern(self):
        """Test that the command prints what the forward model prints"""
        mask = self.tmp / "mask.pgm"
        write_pgm(mask, two_squares_mask(32, 32))
        out = self.tmp / "printed.pgm"
        output = self.call("litho", "--mask", str(mask), "--target", str(mask), "--out", str(out))

        params = load_config(self.config).litho.for_mask(32, 32)
        expected = litho_forward(two_squares_mask(32, 32), params)
        np.testing.assert_array_equal(read_pgm(out).data, expected.data)
        error = int(masked_error(two_squares_mask(32, 32).data, two_squares_mask(32, 32).data, params))
        self.assertIn(f"Masked error against the target: {error} mismatched pixels", output)


class EvaluateCommandTests(CommandTestCase):
    def test_litho_report(self):
        """Test the per-sample CSV of a litho evaluation"""
        data = self.dataset("litho.lvae", "--problem", "litho", "--count", "4")
        model_path = self.model(data)
        report = self.tmp / "report.csv"
        output = self.call("evaluate", "--model", str(model_path), "--data", str(data), "--limit", "1",
                           "--report", str(report))

        lines = report.read_text(encoding="utf-8").splitlines()
        self.assertEqual(lines[0], "sample_id,accuracy,objective,match,volume,tv,solver_steps")
        self.assertEqual(len(lines), 2)
        self.assertEqual(lines[1].split(",")[0], str(load_dataset(data).test[0]))
        self.assertIn("Pooled accuracy", output)

        frame = pd.read_csv(report)
        self.assertEqual(list(frame.columns), COLUMNS)
        self.assertTrue(0.0 <= frame["accuracy"].iloc[0] <= 1.0)
        self.assertGreaterEqual(frame["objective"].iloc[0], frame["match"].iloc[0])
        self.assertEqual(frame["solver_steps"].iloc[0], 0)


class CommandErrorTests(CommandTestCase):
    def test_missing_input(self):
        """Test the missing-file exit code"""
        with self.assertRaises(CommandError) as ctx:
            self.call("train", "--data", str(self.tmp / "absent.lvae"), "--out", str(self.tmp / "m.lvnn"))
        self.assertEqual(ctx.exception.returncode, ExitCode.MissingFile)

    def test_unknown_config_key(self):
        """Test the config exit code on an unknown key"""
        self.config.write_text(TINY_CONFIG + "\n[eval]\nsplits = \"test\"\n", encoding="utf-8")
        with self.assertRaises(CommandError) as ctx:
            self.dataset()
        self.assertEqual(ctx.exception.returncode, ExitCode.Config)
        self.assertIn("splits", str(ctx.exception))

    def test_missing_config(self):
        """Test a config path that does not exist"""
        with self.assertRaises(CommandError) as ctx:
            CommandHelper.call("gen_data", "--config", str(self.tmp / "none.toml"), "--out", str(self.tmp / "d.lvae"))
        self.assertEqual(ctx.exception.returncode, ExitCode.MissingFile)
