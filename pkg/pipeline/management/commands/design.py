from pathlib import Path

from core.io import read_pgm, write_pgm, write_sidecar
from pipeline.design.objective import DesignProblem
from pipeline.design.solver import design
from pipeline.evaluation.roundtrip import litho_roundtrip, roundtrip
from pipeline.management.base import LayoutCommand
from pipeline.neuralnet.checkpoint import load_model


def report_entries(result, accuracy=None) -> dict:
    terms = result.objective
    entries = {
        **terms.as_dict(),
        "z_hat": [float(v) for v in result.z_hat],
        "best_restart": result.best_restart.index,
        "restarts": len(result.restarts_log),
    }
    for record in result.restarts_log:
        entries[f"restart.{record.index}"] = f"{record.value!r} {record.iterations} {record.message}"
    if accuracy is not None:
        entries["roundtrip_accuracy"] = accuracy
    return entries


class Command(LayoutCommand):
    help = "Search the decoder's latent space for the initial layout of a target final shape"

    def add_command_arguments(self, parser):
        parser.add_argument("--model", required=True, help="Model checkpoint")
        parser.add_argument("--target", required=True, help="Target final shape (PGM)")
        parser.add_argument("--problem", choices=["diffusion", "litho"], help="Regularization defaults and round trip")
        parser.add_argument("--alpha", type=float, help="Volume-match weight")
        parser.add_argument("--beta", type=float, help="Total-variation weight")
        parser.add_argument("--bounds", type=float, help="Half-width of the latent box")
        parser.add_argument("--restarts", type=int, help="Number of seeded starting points")
        parser.add_argument("--max-iter", type=int, help="Iteration cap per restart")
        parser.add_argument("--seed", type=int, help="Seed of the starting points")
        parser.add_argument("--roundtrip", action="store_true", help="Run the design through the forward process")
        parser.add_argument("--out", required=True, help="Designed initial layout (PGM)")

    def overrides(self, options):
        return {"design": {
            "problem": options["problem"],
            "alpha": options["alpha"],
            "beta": options["beta"],
            "bounds": options["bounds"],
            "restarts": options["restarts"],
            "max_iter": options["max_iter"],
            "seed": options["seed"],
        }}

    def run(self, config, options):
        model = load_model(self.input_path(options["model"]))
        target = read_pgm(self.input_path(options["target"]))
        search = config.design

        self.stdout.write(
            f"Designing for a {target.height}x{target.width} target: alpha={search.alpha}, "
            f"beta={search.beta}, {search.restarts} restarts"
        )
        result = design(DesignProblem.for_target(target, search), model, search, workers=self.workers(options))
        failed = sum(record.failed for record in result.restarts_log)
        if failed:
            self.stdout.write(self.style.WARNING(f"{failed} of {len(result.restarts_log)} restarts failed"))

        out = Path(options["out"])
        final = out.with_name(out.stem + ".final.pgm")
        write_pgm(out, result.binary_design)
        write_pgm(final, result.generated_final)
        outputs = [out, final]

        accuracy = None
        if options["roundtrip"]:
            if search.problem == "diffusion":
                trip = roundtrip(result.binary_design, target, config.solver)
            else:
                trip = litho_roundtrip(result.binary_design, target, config.litho.for_mask(target.width, target.height))
            accuracy = trip.report.accuracy
            printed = out.with_name(out.stem + ".roundtrip.pgm")
            write_pgm(printed, trip.final)
            outputs.append(printed)
            self.stdout.write(f"Round-trip accuracy {accuracy:.4f}")

        report = out.with_name(out.stem + ".report")
        write_sidecar(report, report_entries(result, accuracy))
        outputs.append(report)
        self.stdout.write(f"Objective {result.objective.value:.6g} from restart {result.best_restart.index}")
        return outputs, search.seed
