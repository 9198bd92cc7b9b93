"""Run configuration: one strict, hashable document for every stage.

Unknown keys are rejected rather than ignored so typos in config files
fail loudly. The hash of the canonical JSON form goes into run
manifests, letting reruns be matched to their exact configuration.
"""

from __future__ import annotations

import dataclasses
import json
import zlib

from .bootstrap import BootstrapConfig
from .errors import ConfigError
from .synthesis import SynthesisConfig


@dataclasses.dataclass(frozen=True)
class ProcgenConfig:
    n_scenes: int = 200
    grammar: dict | None = None


@dataclasses.dataclass(frozen=True)
class ClassifierConfig:
    pos_samples: int = 3
    holdout_fraction: float = 0.2
    threshold: float = 0.6


@dataclasses.dataclass(frozen=True)
class EvaluationConfig:
    dilation_radius: int = 2
    repeats: int = 5
    m_samples: int = 10
    sparsity_fractions: tuple = (1.0, 0.5, 0.25, 0.1, 0.05)
    sparsity_seeds: tuple = (0, 1, 2)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    procgen: ProcgenConfig = ProcgenConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    bootstrap: BootstrapConfig = BootstrapConfig()
    bootstrap_iterations: int = 5
    synthesis: SynthesisConfig = SynthesisConfig()
    evaluation: EvaluationConfig = EvaluationConfig()


_SECTIONS = {
    "procgen": ProcgenConfig,
    "classifier": ClassifierConfig,
    "bootstrap": BootstrapConfig,
    "synthesis": SynthesisConfig,
    "evaluation": EvaluationConfig,
}


def _check_type(value, default, key):
    """Match a config value against the type of the field default."""
    if default is None or default is dataclasses.MISSING:
        return value
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        if ok:
            value = float(value)
    elif isinstance(default, tuple):
        ok = isinstance(value, tuple)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(
            f"{key} expects {type(default).__name__}, got {type(value).__name__}")
    return value


def _build_section(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {path} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = _check_type(value, fields[name].default, f"{path}.{name}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {path} section: {exc}") from exc


def load_config(data=None) -> RunConfig:
    """RunConfig from a dict or JSON text; None gives the defaults."""
    if data is None:
        return RunConfig()
    if isinstance(data, (str, bytes)):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    known = set(_SECTIONS) | {"seed", "bootstrap_iterations"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "bootstrap_iterations" in data:
        kwargs["bootstrap_iterations"] = int(data["bootstrap_iterations"])
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(cls, data[name], name)
    return RunConfig(**kwargs)


def load_config_file(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return load_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def config_to_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def config_to_json(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    return format(zlib.crc32(config_to_json(config).encode()), "08x")
