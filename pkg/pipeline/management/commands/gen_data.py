from pathlib import Path

from core.utils import config_hash
from pipeline.datagen.datasets import generate_diffusion_dataset, generate_litho_dataset, save_dataset
from pipeline.management.base import LayoutCommand


class Command(LayoutCommand):
    help = "Generate a paired dataset of initial layouts and final shapes"

    def add_command_arguments(self, parser):
        parser.add_argument("--problem", choices=["diffusion", "litho"], help="Forward process to sample")
        parser.add_argument("--count", type=int, help="Number of samples")
        parser.add_argument("--seed", type=int, help="Base seed; sample i uses seed + i")
        parser.add_argument("--test-count", type=int, help="Samples held out for testing")
        parser.add_argument("--out", required=True, help="Dataset record file to write")

    def overrides(self, options):
        return {"datagen": {
            "problem": options["problem"],
            "count": options["count"],
            "seed": options["seed"],
            "test_count": options["test_count"],
        }}

    def run(self, config, options):
        data = config.datagen
        workers = self.workers(options)
        self.stdout.write(f"Generating {data.count} {data.problem} samples (seed {data.seed}, {workers} workers)...")
        if data.problem == "diffusion":
            dataset = generate_diffusion_dataset(data.count, data.seed, config.solver, data, workers=workers)
        else:
            dataset = generate_litho_dataset(data.count, data.seed, config.litho, data, workers=workers)

        out = Path(options["out"])
        manifest = save_dataset(out, dataset, config_hash(config.model_dump(mode="json")))
        if dataset.stats.get("duplicates"):
            self.stdout.write(self.style.WARNING(f"{dataset.stats['duplicates']} duplicate initial layouts"))
        self.stdout.write(f"Train {len(dataset.train)}, test {len(dataset.test)}")
        return [out, manifest], data.seed
