"""
Run configuration: one schema per section, loaded from TOML or from the JSON
snapshot a previous run wrote next to its outputs.
"""
import json
import tomllib
from pathlib import Path

from django.conf import settings
from ninja import Schema
from pydantic import ConfigDict, Field, ValidationError

from core.errors import ConfigError, MissingInput, config_errors
from pipeline.datagen.schemas import DatagenConfig
from pipeline.design.schemas import DesignConfig
from pipeline.litho.schemas import LithoParams
from pipeline.neuralnet.schemas import VaeConfig
from pipeline.phasefield.schemas import PhaseParams


class FieldsConfig(Schema):
    model_config = ConfigDict(extra="forbid")

    threshold: float = Field(0.5, gt=0, lt=1)
    tile_columns: int = Field(8, ge=1)
    tile_gap: int = Field(2, ge=0)


class EvalConfig(Schema):
    model_config = ConfigDict(extra="forbid")

    split: str = Field("test", pattern="^(train|test|all)$")
    limit: int | None = Field(None, ge=1)


class LayoutConfig(Schema):
    model_config = ConfigDict(extra="forbid")

    fields: FieldsConfig = Field(default_factory=FieldsConfig)
    solver: PhaseParams = Field(default_factory=PhaseParams)
    litho: LithoParams = Field(default_factory=LithoParams)
    datagen: DatagenConfig = Field(default_factory=DatagenConfig)
    vae: VaeConfig = Field(default_factory=VaeConfig)
    design: DesignConfig = Field(default_factory=DesignConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)


SECTIONS = tuple(LayoutConfig.model_fields)


def _describe(exc: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in exc.errors())


def _read(path: Path) -> dict:
    if not path.exists():
        raise MissingInput(config_errors[400].MissingFile.value.format(path=path))
    if path.suffix == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(config_errors[400].Unreadable.value.format(path=path, kind="JSON", detail=exc)) from exc
        # run snapshots wrap the resolved config
        return data.get("config", data)
    try:
        return tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(config_errors[400].Unreadable.value.format(path=path, kind="TOML", detail=exc)) from exc


def _merge(data: dict, overrides: dict) -> dict:
    merged = dict(data)
    for section, values in overrides.items():
        if section not in SECTIONS:
            raise ConfigError(config_errors[400].UnknownSection.value.format(section=section))
        values = {key: value for key, value in values.items() if value is not None}
        if values:
            merged[section] = {**merged.get(section, {}), **values}
    return merged


def load_config(path=None, overrides: dict | None = None) -> LayoutConfig:
    """
    Validate a config file, with command-line values laid over it before
    validation so derived defaults follow the overrides. None values are ignored.
    """
    path = Path(path) if path is not None else Path(settings.LAYOUT_CONFIG)
    data = _merge(_read(path), overrides or {})
    try:
        return LayoutConfig(**data)
    except ValidationError as exc:
        raise ConfigError(config_errors[400].InvalidValue.value.format(detail=_describe(exc))) from exc


def snapshot_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".config.json")


def write_snapshot(output, config: LayoutConfig, command: str, options: dict, seed=None) -> Path:
    path = snapshot_path(output)
    snapshot = {
        "command": command,
        "seed": seed,
        "options": options,
        "config": config.model_dump(mode="json"),
    }
    path.write_text(json.dumps(snapshot, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")
    return path
