from pathlib import Path

from pipeline.datagen.datasets import load_dataset
from pipeline.evaluation.accuracy import reconstruction_accuracy
from pipeline.management.base import LayoutCommand
from pipeline.neuralnet.checkpoint import load_checkpoint
from pipeline.neuralnet.training import train
from pipeline.neuralnet.vae import VaeModel


class Command(LayoutCommand):
    help = "Train the variational autoencoder on the training split of a dataset"

    def add_command_arguments(self, parser):
        parser.add_argument("--data", required=True, help="Dataset record file")
        parser.add_argument("--latent-dim", type=int, help="Latent dimension")
        parser.add_argument("--epochs", type=int, help="Maximum number of epochs")
        parser.add_argument("--batch-size", type=int, help="Minibatch size")
        parser.add_argument("--lr", type=float, help="Adam learning rate")
        parser.add_argument("--seed", type=int, help="Seed of initialization, shuffling and noise")
        parser.add_argument("--resume", help="Checkpoint to continue from, optimizer state included")
        parser.add_argument("--out", required=True, help="Model checkpoint to write after every epoch")

    def overrides(self, options):
        return {"vae": {
            "latent_dim": options["latent_dim"],
            "epochs": options["epochs"],
            "batch_size": options["batch_size"],
            "learning_rate": options["lr"],
            "seed": options["seed"],
        }}

    def run(self, config, options):
        dataset = load_dataset(self.input_path(options["data"]))
        vae = config.vae
        state = None
        if options["resume"]:
            model, state = load_checkpoint(self.input_path(options["resume"]))
            model, state = model.astype(vae.precision), state.astype(vae.precision)
        else:
            model = VaeModel.from_config(dataset.shape[0] * dataset.shape[1], vae)

        self.stdout.write(
            f"Training on {len(dataset.train)} samples: {model.parameter_count} parameters, latent {model.latent_dim}"
        )
        out = Path(options["out"])
        result = train(model, dataset.matrix("train", dtype=model.dtype), vae, checkpoint=out, state=state)
        history = result.history
        self.stdout.write(f"{history.epochs} epochs, best loss {history.best_loss:.6f}")
        if history.stopped_early:
            self.stdout.write(self.style.WARNING("Stopped early on a loss plateau"))
        if dataset.test:
            report = reconstruction_accuracy(result.model, dataset, "test", config.fields.threshold)
            self.stdout.write(f"Test reconstruction accuracy {report.accuracy:.4f}")
        return [out], vae.seed
