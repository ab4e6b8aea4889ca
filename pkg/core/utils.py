import hashlib
import json
import logging

from django.db import DatabaseError

from core.models import RunRecord

logger = logging.getLogger(__name__)


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON form of a resolved config."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def record_run(command, config: dict, options: dict, outputs, seed=None, status=RunRecord.Status.SUCCEEDED, message=""):
    """
    Store a ledger entry for a finished command. The ledger is best-effort: an
    unmigrated or unreachable database only produces a warning.
    """
    try:
        return RunRecord.objects.create(
            command=command,
            seed=seed,
            config_hash=config_hash(config),
            config=config,
            options=options,
            outputs=[str(o) for o in outputs],
            status=status,
            message=message,
        )
    except DatabaseError as exc:
        logger.warning("Run ledger unavailable, %s not recorded: %s", command, exc)
        return None
