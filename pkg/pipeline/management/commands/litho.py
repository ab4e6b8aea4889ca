from pathlib import Path

from core.fields import binarize
from core.io import read_pgm, write_pgm
from pipeline.evaluation.accuracy import binary_accuracy
from pipeline.litho.model import aerial_image, resist_threshold
from pipeline.management.base import LayoutCommand


class Command(LayoutCommand):
    help = "Print a mask through the Gaussian aerial-image and resist-threshold model"

    def add_command_arguments(self, parser):
        parser.add_argument("--mask", required=True, help="Mask (PGM)")
        parser.add_argument("--sigma", type=float, help="Gaussian width in pixels")
        parser.add_argument("--threshold", type=float, help="Resist threshold")
        parser.add_argument("--method", choices=["fft", "direct"], help="Convolution method")
        parser.add_argument("--target", help="Wanted pattern (PGM); reports the squared error of the print")
        parser.add_argument("--aerial", help="Also write the aerial image (PGM)")
        parser.add_argument("--out", required=True, help="Printed pattern (PGM)")

    def overrides(self, options):
        return {"litho": {"sigma": options["sigma"], "threshold": options["threshold"], "method": options["method"]}}

    def run(self, config, options):
        mask = read_pgm(self.input_path(options["mask"]))
        params = config.litho if options["sigma"] else config.litho.for_mask(mask.width, mask.height)
        aerial = aerial_image(mask, params)
        printed = resist_threshold(aerial, params.threshold)

        out = Path(options["out"])
        write_pgm(out, printed)
        outputs = [out]
        if options["aerial"]:
            write_pgm(options["aerial"], aerial)
            outputs.append(Path(options["aerial"]))
        if options["target"]:
            target = read_pgm(self.input_path(options["target"]))
            report = binary_accuracy(printed, binarize(target))
            self.stdout.write(f"Masked error against the target: {report.total - report.matched} mismatched pixels (accuracy {report.accuracy:.4f})")
        self.stdout.write(f"Printed {int(printed.data.sum())} of {printed.data.size} pixels (sigma={params.sigma:.4g})")
        return outputs, None
