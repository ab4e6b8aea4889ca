from pathlib import Path

import pandas as pd

from core.io import read_pgm, write_pgm
from pipeline.management.base import LayoutCommand
from pipeline.phasefield.solver import HistoryPoint, anneal_layout, write_phase_checkpoint
from pipeline.phasefield.workspace import SpectralWorkspace


class Command(LayoutCommand):
    help = "Smooth a binary layout and evolve it by surface diffusion to steady state"

    def add_command_arguments(self, parser):
        parser.add_argument("--input", required=True, help="Initial binary layout (PGM)")
        parser.add_argument("--dt", type=float, help="Time step")
        parser.add_argument("--max-steps", type=int, help="Step cap of the evolution")
        parser.add_argument("--steady-tol", type=float, help="Sup-norm rate that counts as steady")
        parser.add_argument("--out", required=True, help="Binarized final shape (PGM)")
        parser.add_argument("--history", help="CSV of step, time, mass and energy (default: <out>.csv)")
        parser.add_argument("--phase", help="Raw final phase field with a params sidecar")

    def overrides(self, options):
        return {"solver": {"dt": options["dt"], "max_steps": options["max_steps"], "steady_tol": options["steady_tol"]}}

    def run(self, config, options):
        layout = read_pgm(self.input_path(options["input"]))
        params = config.solver
        if (params.ny, params.nx) != layout.shape:
            params = params.for_grid(layout.width, layout.height)

        self.stdout.write(f"Evolving a {layout.height}x{layout.width} layout (dt={params.dt:.4g})...")
        ws = SpectralWorkspace.for_params(params, workers=self.workers(options))
        result = anneal_layout(layout, params, ws)
        evolution = result.evolution

        out = Path(options["out"])
        write_pgm(out, result.final)
        history = Path(options["history"] or out.with_name(out.stem + ".csv"))
        trace = pd.DataFrame(evolution.history, columns=list(HistoryPoint._fields))
        trace.to_csv(history, index=False, lineterminator="\n")
        outputs = [out, history]
        if options["phase"]:
            phase = Path(options["phase"])
            sidecar = write_phase_checkpoint(
                phase, evolution.phase, evolution.params, steps=evolution.steps, converged=evolution.converged
            )
            outputs += [phase, sidecar]

        if evolution.converged:
            self.stdout.write(f"Steady after {evolution.steps} steps")
        else:
            self.stdout.write(self.style.WARNING(f"No steady state within {evolution.steps} steps"))
        if evolution.escalations:
            self.stdout.write(self.style.WARNING(f"Stabilizers doubled {evolution.escalations} times"))
        return outputs, None
