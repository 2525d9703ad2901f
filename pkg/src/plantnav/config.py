"""Run configuration files: strict JSON -> dataclass parsing and the resolved echo.

Unknown keys anywhere in the document are rejected so that a typo never
silently falls back to a default.
"""
from __future__ import annotations

import dataclasses
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from plantnav.dynamics import EnergyConfig
from plantnav.errors import ConfigError
from plantnav.reward import RewardConfig
from plantnav.trainer import CurriculumStage, EpsilonSchedule, TrainConfig

TRAIN_SECTION_FIELDS = (
    "episodes", "max_steps", "gamma", "lr", "batch_size", "replay_capacity", "target_sync_interval",
    "warmup_transitions", "start", "hidden_sizes", "clearance_cap", "checkpoint_interval",
)
TOP_LEVEL_KEYS = ("world", "out", "seed", "train", "reward", "energy", "schedule", "curriculum")


@dataclass(frozen=True)
class RunConfig:
    world: Optional[str] = None
    out: Optional[str] = None
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def seed(self) -> int:
        return self.train.seed


def _coerce(value: Any, tp: Any, where: str) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value))
        if len(value) != len(args):
            raise ConfigError(f"{where}: expected {len(args)} entries, got {len(value)}")
        return tuple(_coerce(v, a, f"{where}[{i}]") for i, (v, a) in enumerate(zip(value, args)))
    raise ConfigError(f"{where}: unsupported field type {tp!r}")  # pragma: no cover


def _build(cls, data: Any, where: str, only: tuple[str, ...] | None = None, **extra):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    allowed = only if only is not None else tuple(f.name for f in dataclasses.fields(cls))
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}") for k, v in data.items()}
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def parse_run_config(doc: Any) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    unknown = sorted(set(doc) - set(TOP_LEVEL_KEYS))
    if unknown:
        raise ConfigError(f"config: unknown key(s) {', '.join(unknown)}")
    world = _coerce(doc.get("world"), Optional[str], "config.world")
    out = _coerce(doc.get("out"), Optional[str], "config.out")
    seed = _coerce(doc.get("seed", 0), int, "config.seed")
    extra: dict[str, Any] = {"seed": seed}
    if "reward" in doc:
        extra["reward"] = _build(RewardConfig, doc["reward"], "config.reward")
    if "energy" in doc:
        extra["energy"] = _build(EnergyConfig, doc["energy"], "config.energy")
    if "schedule" in doc:
        extra["schedule"] = _build(EpsilonSchedule, doc["schedule"], "config.schedule")
    if "curriculum" in doc:
        stages = doc["curriculum"]
        if not isinstance(stages, list):
            raise ConfigError("config.curriculum: expected a list of stages")
        extra["curriculum"] = tuple(
            _build(CurriculumStage, s, f"config.curriculum[{i}]") for i, s in enumerate(stages)
        )
    train = _build(TrainConfig, doc.get("train", {}), "config.train", TRAIN_SECTION_FIELDS, **extra)
    return RunConfig(world, out, train)


def load_run_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_run_config(doc)


def _plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def run_config_to_dict(cfg: RunConfig) -> dict:
    """Fully resolved document; feeding it back to :func:`parse_run_config` gives ``cfg``."""
    t = cfg.train
    return {
        "world": cfg.world,
        "out": cfg.out,
        "seed": t.seed,
        "train": {k: _plain(getattr(t, k)) for k in TRAIN_SECTION_FIELDS},
        "reward": _plain(t.reward),
        "energy": _plain(t.energy),
        "schedule": _plain(t.schedule),
        "curriculum": _plain(t.curriculum),
    }
