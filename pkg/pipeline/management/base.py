"""
Shared plumbing of the layout commands: config loading with flag overrides,
worker caps, input checks, the resolved-config snapshot and the run ledger.
"""
import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from core.errors import LayoutError, MissingInput, file_errors
from core.models import RunRecord
from core.utils import config_hash, record_run
from pipeline.config import LayoutConfig, load_config, write_snapshot

logger = logging.getLogger(__name__)

DJANGO_OPTIONS = {
    "verbosity", "settings", "pythonpath", "traceback", "no_color", "force_color", "skip_checks", "stdout", "stderr",
}


def plain_options(options: dict) -> dict:
    """Command options without Django's own flags, as JSON-friendly values."""
    plain = {}
    for key, value in options.items():
        if key in DJANGO_OPTIONS:
            continue
        plain[key] = value if value is None or isinstance(value, (bool, int, float, str)) else str(value)
    return plain


class LayoutCommand(BaseCommand):
    """
    Base of every pipeline command. Subclasses implement `add_command_arguments`,
    `overrides` and `run`; `run` returns the written files, primary output first,
    and the seed the run used.
    """

    def add_arguments(self, parser):
        parser.add_argument("--config", help="TOML config or a JSON snapshot of an earlier run")
        parser.add_argument("--threads", type=int, help="Worker cap (default: LAYOUT_THREADS)")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def overrides(self, options: dict) -> dict:
        return {}

    def run(self, config: LayoutConfig, options: dict) -> tuple[list[Path], int | None]:
        raise NotImplementedError

    def workers(self, options: dict) -> int:
        threads = options.get("threads") or settings.LAYOUT_THREADS
        return max(1, min(threads, settings.LAYOUT_THREADS))

    def input_path(self, value) -> Path:
        path = Path(value)
        if not path.exists():
            raise MissingInput(file_errors[400].MissingInput.value.format(path=path))
        return path

    def handle(self, *args, **options):
        command = self.__module__.rsplit(".", 1)[-1]
        plain = plain_options(options)
        config = None
        try:
            config = load_config(options.get("config"), self.overrides(options))
            outputs, seed = self.run(config, options)
        except LayoutError as exc:
            logger.error("%s failed: %s", command, exc.message)
            if config is not None:
                record_run(command, config.model_dump(mode="json"), plain, [], status=RunRecord.Status.FAILED,
                           message=exc.message)
            raise CommandError(exc.message, returncode=int(exc.exit_code)) from exc

        resolved = config.model_dump(mode="json")
        snapshot = write_snapshot(outputs[0], config, command, plain, seed) if outputs else None
        record_run(command, resolved, plain, outputs + ([snapshot] if snapshot else []), seed=seed)
        self.stdout.write(self.style.SUCCESS(
            f"{command} finished (config {config_hash(resolved)[:12]}): {', '.join(str(o) for o in outputs)}"
        ))
