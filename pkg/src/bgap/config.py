"""Run configuration: schema-validated YAML with defaults for every field.

The schema is the nested dataclass tree below; unknown keys are rejected so a
typo cannot silently fall back to a default.  Serialization is canonical
(sorted keys), making parse -> serialize -> parse a fixed point and allowing
the resolved snapshot to be embedded byte-stably in checkpoints.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, is_dataclass

import yaml

from .env import EnvConfig
from .ppo import PpoHyper
from .quadruped import QuadrupedModel


class ConfigError(ValueError):
    """Malformed or unknown configuration content."""


@dataclass
class ModelConfig:
    """Overridable physical parameters of the robot model."""

    trunk_mass: float = 15.0
    kp: float = 25.0
    kd: float = 0.5
    torque_limit: float = 23.7
    nominal_height: float = 0.325

    def build(self) -> QuadrupedModel:
        return QuadrupedModel(trunk_mass=self.trunk_mass, kp=self.kp, kd=self.kd,
                              torque_limit=self.torque_limit,
                              nominal_height=self.nominal_height)


@dataclass
class RunConfig:
    seed: int = 0
    env: EnvConfig = field(default_factory=EnvConfig)
    ppo: PpoHyper = field(default_factory=PpoHyper)
    model: ModelConfig = field(default_factory=ModelConfig)

    def validate(self) -> None:
        self.env.validate()
        if not (0.0 < self.ppo.gamma <= 1.0) or not (0.0 <= self.ppo.lam <= 1.0):
            raise ConfigError("gamma must be in (0,1], lambda in [0,1]")
        if self.ppo.clip <= 0.0:
            raise ConfigError("clip must be positive")


def _coerce(value, target):
    """Coerce a parsed YAML scalar/list to the type of the default value."""
    if isinstance(target, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected boolean, got {value!r}")
        return value
    if isinstance(target, int) and not isinstance(target, bool):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected number, got {value!r}")
        return int(value)
    if isinstance(target, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected number, got {value!r}")
        return float(value)
    if isinstance(target, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected list, got {value!r}")
        return tuple(value)
    if isinstance(target, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected string, got {value!r}")
        return value
    return value


def dataclass_from_dict(cls, data: dict, path: str = ""):
    """Build a dataclass from a nested dict, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"expected mapping at {path or 'root'}, got {data!r}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) at {path or 'root'}: {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, f in known.items():
        if name not in data:
            continue
        default_value = getattr(defaults, name)
        sub_path = f"{path}.{name}" if path else name
        if is_dataclass(default_value):
            kwargs[name] = dataclass_from_dict(type(default_value), data[name], sub_path)
        else:
            kwargs[name] = _coerce(data[name], default_value)
    return dataclasses.replace(defaults, **kwargs)


def to_dict(obj) -> dict:
    out = {}
    for f in fields(obj):
        v = getattr(obj, f.name)
        if is_dataclass(v):
            out[f.name] = to_dict(v)
        elif isinstance(v, tuple):
            out[f.name] = list(v)
        else:
            out[f.name] = v
    return out


def serialize(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True, default_flow_style=False)


def deserialize(text: str) -> RunConfig:
    data = yaml.safe_load(text)
    cfg = dataclass_from_dict(RunConfig, data)
    cfg.validate()
    return cfg


def load_config(path: str | None) -> RunConfig:
    """Load a RunConfig from a YAML file; None gives all defaults."""
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    with open(path) as fh:
        return deserialize(fh.read())
