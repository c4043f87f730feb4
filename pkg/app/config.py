# app/config.py
# relative paths resolve against the config file; no environment variables

import hashlib
import json
from pathlib import Path
from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import ConfigError
from core.methods import MethodSpec
from core.seeds import U64_MAX
from core.sweep import SweepConfig
from core.table1 import Table1Config

DEFAULT_FIT_METHODS = ("financed_only", "augmentation", "parceling", "generative")


class FitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    data: Optional[Path] = None
    schema_path: Path
    methods: List[MethodSpec] = Field(
        default_factory=lambda: [MethodSpec(name=n) for n in DEFAULT_FIT_METHODS], min_length=1
    )
    holdout_fraction: float = Field(0.0, ge=0, lt=1)
    bins: Optional[int] = Field(None, ge=2)
    bin_columns: Optional[List[str]] = None

    @model_validator(mode="after")
    def _check(self) -> "FitConfig":
        simulation_only = sorted({m.name for m in self.methods} & {"oracle", "ideal_reweighting"})
        if simulation_only:
            raise ValueError(f"{', '.join(simulation_only)} need simulated ground truth and cannot run on a CSV")
        keys = [m.key for m in self.methods]
        if len(set(keys)) != len(keys):
            raise ValueError("method labels must be unique")
        return self


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(0, ge=0, le=U64_MAX)
    output_dir: Path = Path("out")
    jobs: int = Field(1, ge=1)
    sweep: Optional[SweepConfig] = None
    table1: Optional[Table1Config] = None
    fit: Optional[FitConfig] = None

    def digest(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()[:16]


def _error_keys(e: ValidationError) -> List[str]:
    return [".".join(str(p) for p in err["loc"]) or "<root>" for err in e.errors()]


def _describe(e: ValidationError) -> str:
    parts = []
    for err in e.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            parts.append(f"unknown key {loc!r}")
        else:
            parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def _resolve(p: Optional[Path], base: Path) -> Optional[Path]:
    if p is None or p.is_absolute():
        return p
    return base / p


def _resolve_paths(cfg: RunConfig, base: Path) -> RunConfig:
    update = {}
    if cfg.sweep is not None and cfg.sweep.csv is not None:
        csv = cfg.sweep.csv.model_copy(
            update={"path": _resolve(cfg.sweep.csv.path, base), "schema_path": _resolve(cfg.sweep.csv.schema_path, base)}
        )
        update["sweep"] = cfg.sweep.model_copy(update={"csv": csv})
    if cfg.fit is not None:
        update["fit"] = cfg.fit.model_copy(
            update={"data": _resolve(cfg.fit.data, base), "schema_path": _resolve(cfg.fit.schema_path, base)}
        )
    return cfg.model_copy(update=update) if update else cfg


def parse_run_config(raw: dict, base_dir: Union[str, Path] = ".") -> RunConfig:
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config: {_describe(e)}", _error_keys(e)) from e
    return _resolve_paths(cfg, Path(base_dir))


def load_run_config(path: Union[str, Path]) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {p} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {p} must hold a JSON object")
    return parse_run_config(raw, p.parent)


def with_overrides(
    cfg: RunConfig,
    seed: Optional[int] = None,
    out: Optional[Union[str, Path]] = None,
    jobs: Optional[int] = None,
) -> RunConfig:
    """Apply CLI overrides, validating them like config values."""
    raw = json.loads(cfg.model_dump_json())
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["output_dir"] = str(out)
    if jobs is not None:
        raw["jobs"] = jobs
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid override: {_describe(e)}", _error_keys(e)) from e


def require(cfg: RunConfig, section: str) -> None:
    if getattr(cfg, section) is None:
        raise ConfigError(f"config has no {section!r} section", [section])
