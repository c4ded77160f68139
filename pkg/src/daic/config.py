"""Experiment configuration.

Files are TOML written as flat dotted keys, for example::

    cycles = 8
    oracle_mode = "dnn_os"
    trigger.divergence_threshold = 0.05
    retrain.mode = "replace_after_k"
    shift.swap_pairs = [[2, 7]]

Every key is optional; missing keys take the defaults below.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .cycle import RetrainPolicy, TriggerPolicy
from .dataset import ShiftSpec, bundled_mnist_paths
from .estimator import SamplingPlan
from .exceptions import ConfigError, ParameterError
from .model import TrainConfig

ORACLE_MODES = ("dnn_os", "baseline")
DATASETS = ("mnist", "synthetic")


@dataclass(frozen=True)
class DatasetConfig:
    kind: str = "mnist"
    # empty paths select the MNIST subset bundled with the package
    mnist_images: str = ""
    mnist_labels: str = ""
    synthetic_n: int = 10000
    synthetic_noise: float = 0.45
    synthetic_seed: int = 0

    def __post_init__(self):
        if self.kind not in DATASETS:
            raise ParameterError(f"kind must be one of {DATASETS}, got {self.kind!r}")
        if bool(self.mnist_images) != bool(self.mnist_labels):
            raise ParameterError("mnist_images and mnist_labels must be given together")

    def resolved_paths(self):
        if self.mnist_images:
            return Path(self.mnist_images), Path(self.mnist_labels)
        return bundled_mnist_paths()


@dataclass(frozen=True)
class OracleConfig:
    min_confidence: float = 0.99
    min_support: int = 10
    tree_max_depth: int = 12
    n_estimators: int = 100
    forest_max_depth: int = 10

    def __post_init__(self):
        if not 0 < self.min_confidence <= 1:
            raise ParameterError(f"min_confidence must lie in (0, 1], got {self.min_confidence}")
        for name in ("min_support", "tree_max_depth", "n_estimators", "forest_max_depth"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"


@dataclass(frozen=True)
class ExperimentConfig:
    cycles: int = 8
    repetitions: int = 5
    oracle_mode: str = "dnn_os"
    master_seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    trigger: TriggerPolicy = field(default_factory=TriggerPolicy)
    retrain: RetrainPolicy = field(default_factory=RetrainPolicy)
    sampling: SamplingPlan = field(default_factory=SamplingPlan)
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        if self.cycles < 1:
            raise ParameterError(f"cycles must be >= 1, got {self.cycles}")
        if self.repetitions < 1:
            raise ParameterError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.oracle_mode not in ORACLE_MODES:
            raise ParameterError(f"oracle_mode must be one of {ORACLE_MODES}, got {self.oracle_mode!r}")


_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "trigger": TriggerPolicy,
    "retrain": RetrainPolicy,
    "sampling": SamplingPlan,
    "shift": ShiftSpec,
    "train": TrainConfig,
    "oracle": OracleConfig,
    "output": OutputConfig,
}
# seeds inside sub-configs are derived from master_seed at run time
_HIDDEN = {"sampling.seed", "train.seed"}


def _flatten(tree, prefix=""):
    flat = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, name + "."))
        else:
            flat[name] = value
    return flat


def known_keys():
    keys = {}
    defaults = ExperimentConfig()
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in _SECTION_TYPES:
            for sub in dataclasses.fields(_SECTION_TYPES[f.name]):
                name = f"{f.name}.{sub.name}"
                if name not in _HIDDEN:
                    keys[name] = getattr(getattr(defaults, f.name), sub.name)
        else:
            keys[f.name] = getattr(defaults, f.name)
    return keys


def _coerce(key, value, default):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
    elif isinstance(default, int):
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, str):
            return value
    elif isinstance(default, tuple):
        if isinstance(value, (list, tuple)):
            try:
                return tuple(tuple(int(v) for v in pair) for pair in value)
            except (TypeError, ValueError):
                pass
    raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}")


def build_config(values: dict) -> ExperimentConfig:
    """Assemble a config from a flat ``{dotted_key: value}`` mapping."""
    keys = known_keys()
    for key in values:
        if key not in keys:
            raise ConfigError(f"unknown configuration key '{key}'")
    coerced = {k: _coerce(k, v, keys[k]) for k, v in values.items()}

    kwargs = {}
    for section, cls in _SECTION_TYPES.items():
        prefix = section + "."
        sub = {k[len(prefix) :]: v for k, v in coerced.items() if k.startswith(prefix)}
        try:
            kwargs[section] = cls(**sub)
        except ParameterError as exc:
            raise ConfigError(f"invalid [{section}] setting: {exc}") from exc
    top = {k: v for k, v in coerced.items() if "." not in k}
    try:
        return ExperimentConfig(**top, **kwargs)
    except ParameterError as exc:
        raise ConfigError(f"invalid setting: {exc}") from exc


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a config file (optional) and apply flag overrides on top."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            values = _flatten(tomllib.loads(text))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return build_config(values)


def _toml_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise TypeError(f"cannot serialise {value!r}")


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key in known_keys():
        obj = cfg
        for part in key.split("."):
            obj = getattr(obj, part)
        lines.append(f"{key} = {_toml_value(obj)}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()
