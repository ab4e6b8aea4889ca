from pathlib import Path

import pandas as pd

from pipeline.config import load_config
from pipeline.datagen.datasets import load_dataset
from pipeline.design.schemas import REGULARIZATION_DEFAULTS, DesignConfig
from pipeline.evaluation.roundtrip import evaluate_designs
from pipeline.management.base import LayoutCommand
from pipeline.neuralnet.checkpoint import load_model

COLUMNS = ["sample_id", "accuracy", "objective", "match", "volume", "tv", "solver_steps"]


class Command(LayoutCommand):
    help = "Design every target of a dataset split, run the forward process and score the outcome"

    def add_command_arguments(self, parser):
        parser.add_argument("--model", required=True, help="Model checkpoint")
        parser.add_argument("--data", required=True, help="Dataset record file")
        parser.add_argument("--phase-config", help="Config whose solver section drives the round trip")
        parser.add_argument("--split", choices=["train", "test", "all"], help="Targets to design for")
        parser.add_argument("--limit", type=int, help="Evaluate only the first N targets of the split")
        parser.add_argument("--report", required=True, help="Per-sample CSV report")

    def overrides(self, options):
        return {"eval": {"split": options["split"], "limit": options["limit"]}}

    def run(self, config, options):
        model = load_model(self.input_path(options["model"]))
        dataset = load_dataset(self.input_path(options["data"]))
        solver = config.solver
        if options["phase_config"]:
            solver = load_config(self.input_path(options["phase_config"])).solver
        search = config.design
        if dataset.problem in REGULARIZATION_DEFAULTS and dataset.problem != search.problem:
            self.stdout.write(self.style.WARNING(f"Dataset is a {dataset.problem} dataset; using its regularization defaults"))
            search = DesignConfig(**{**search.model_dump(exclude={"alpha", "beta"}), "problem": dataset.problem})

        self.stdout.write(f"Evaluating {dataset.problem} designs on the {config.eval.split} split...")
        evaluation = evaluate_designs(
            model,
            dataset,
            search,
            phase_params=solver,
            litho_params=config.litho,
            split=config.eval.split,
            limit=config.eval.limit,
            workers=self.workers(options),
        )

        report = Path(options["report"])
        frame = pd.DataFrame([row.as_csv_row() for row in evaluation.rows], columns=COLUMNS)
        frame.to_csv(report, index=False, lineterminator="\n")

        unconverged = sum(not row.converged for row in evaluation.rows)
        if unconverged:
            self.stdout.write(self.style.WARNING(f"{unconverged} round trips stopped before steady state"))
        self.stdout.write(
            f"Pooled accuracy {evaluation.report.accuracy:.4f}, "
            f"mean per-sample accuracy {evaluation.report.mean_accuracy:.4f} over {len(evaluation.rows)} targets"
        )
        if dataset.problem == "diffusion":
            self.stdout.write(f"Trench-like designs: {evaluation.trench_like_fraction:.2%}")
        return [report], search.seed
