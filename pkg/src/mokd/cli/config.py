"""Strict JSON experiment configs.

Every key must be known; numeric types and ranges are validated before any
computation starts. Nested objects ``controller`` and ``subspace`` follow the
same rule.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from ..moo_solver import BaselineWeights
from ..trainer.loop import SubspaceConfig, TrainConfig
from ..weight_controller import ControllerConfig

BUNDLED = Path(__file__).resolve().parent.parent / "configs"


class ConfigError(ValueError):
    pass


def _fields(cls) -> dict:
    return {f.name: f for f in dataclasses.fields(cls)}


def _typed(name, value, default):
    """Reject JSON values whose type disagrees with the field default."""
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{name}' must be a boolean")
    elif isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{name}' must be an integer")
    elif isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{name}' must be a number")
        value = float(value)
    elif isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"'{name}' must be a string")
    return value


def _build(cls, data, where: str, special=None):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = _fields(cls)
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    special = special or {}
    kwargs = {}
    defaults = cls()
    for key, value in data.items():
        if key in special:
            kwargs[key] = special[key](value)
            continue
        default = getattr(defaults, key)
        if default is None:
            if value is not None and (isinstance(value, bool) or not isinstance(value, (int, str))):
                raise ConfigError(f"'{key}' has an invalid type")
            kwargs[key] = value
        else:
            kwargs[key] = _typed(f"{where}.{key}" if where != "config" else key, value, default)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


def _alpha(value):
    if isinstance(value, dict):
        value = [value.get("alpha1"), value.get("alpha2")] if set(value) <= {"alpha1", "alpha2"} else None
    if not (isinstance(value, list) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    )):
        raise ConfigError("'controller.fixed_alpha' must be a list of two positive numbers")
    try:
        return BaselineWeights(float(value[0]), float(value[1]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(data: dict) -> TrainConfig:
    return _build(
        TrainConfig,
        data,
        "config",
        special={
            "controller": lambda v: _build(ControllerConfig, v, "controller", {"fixed_alpha": _alpha}),
            "subspace": lambda v: _build(SubspaceConfig, v, "subspace"),
        },
    )


def resolve_config_path(path) -> Path:
    """A path on disk, or the name of a bundled config such as ``two_quadratic_exact.json``."""
    p = Path(path)
    if p.exists():
        return p
    bundled = BUNDLED / p.name
    if bundled.exists():
        return bundled
    if not p.suffix and (BUNDLED / f"{p.name}.json").exists():
        return BUNDLED / f"{p.name}.json"
    raise ConfigError(f"config file not found: {path}")


def load_config(path) -> TrainConfig:
    p = resolve_config_path(path)
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: TrainConfig) -> dict:
    d = dataclasses.asdict(cfg)
    fa = cfg.controller.fixed_alpha
    d["controller"]["fixed_alpha"] = [fa.alpha1, fa.alpha2]
    return d
