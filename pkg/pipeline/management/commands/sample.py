from pathlib import Path

from core.errors import DimensionMismatch, field_errors
from core.fields import tile
from core.io import write_pgm
from pipeline.management.base import LayoutCommand
from pipeline.neuralnet.checkpoint import load_model
from pipeline.neuralnet.vae import sample_latent


class Command(LayoutCommand):
    help = "Decode latent vectors drawn from the prior into new paired images"

    def add_command_arguments(self, parser):
        parser.add_argument("--model", required=True, help="Model checkpoint")
        parser.add_argument("--height", type=int, required=True, help="Height of one paired image")
        parser.add_argument("--count", type=int, default=16)
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--out", default="samples.pgm", help="Montage PGM to write")

    def run(self, config, options):
        model = load_model(self.input_path(options["model"]))
        height = options["height"]
        if model.input_dim % (2 * height):
            message = field_errors[400].DimensionMismatch.value
            raise DimensionMismatch(message.format(left=model.input_dim, right=f"paired images of height {height}"))
        images = sample_latent(model, options["count"], options["seed"])
        montage = tile(
            [image.reshape(height, -1) for image in images],
            columns=config.fields.tile_columns,
            gap=config.fields.tile_gap,
        )
        out = Path(options["out"])
        write_pgm(out, montage)
        self.stdout.write(f"Decoded {options['count']} prior samples")
        return [out], options["seed"]
