from pathlib import Path

from core.fields import tile
from core.io import write_pgm
from pipeline.datagen.datasets import load_dataset
from pipeline.evaluation.accuracy import reconstruction_accuracy
from pipeline.management.base import LayoutCommand
from pipeline.neuralnet.checkpoint import load_model
from pipeline.neuralnet.vae import reconstruct


class Command(LayoutCommand):
    help = "Reconstruct dataset samples with a trained model; originals above, reconstructions below"

    def add_command_arguments(self, parser):
        parser.add_argument("--model", required=True, help="Model checkpoint")
        parser.add_argument("--data", required=True, help="Dataset record file")
        parser.add_argument("--split", choices=["train", "test", "all"], default="test")
        parser.add_argument("--count", type=int, default=8, help="Samples shown in the montage")
        parser.add_argument("--out", default="reconstruction.pgm", help="Montage PGM to write")

    def run(self, config, options):
        model = load_model(self.input_path(options["model"]))
        dataset = load_dataset(self.input_path(options["data"]))
        samples = dataset.subset(options["split"])[:options["count"]]
        shape = dataset.shape

        rebuilt = reconstruct(model, dataset.matrix(options["split"], dtype=model.dtype)[:len(samples)])
        originals = [sample.combined for sample in samples]
        montage = tile(
            originals + [row.reshape(shape) for row in rebuilt],
            columns=len(originals),
            gap=config.fields.tile_gap,
        )
        out = Path(options["out"])
        write_pgm(out, montage)

        report = reconstruction_accuracy(model, dataset, options["split"], config.fields.threshold)
        self.stdout.write(
            f"Reconstruction accuracy on {options['split']}: {report.accuracy:.4f} "
            f"(mean per sample {report.mean_accuracy:.4f})"
        )
        return [out], None
