"""YAML experiment configuration (schema version 1).

Layout::

    schema_version: 1
    scenario:
      array: {num_sensors: 4, spacing: 1.0, convention: electrical}
      angles: [0.8]            # radians in the array convention
      power: 1.0               # per-source power
      noise_decay: 1.0         # C_ij = sigma^2 exp(-noise_decay |i-j|)
      signal:
        kind: fir              # kronecker | fir | explicit
        taps: [1.0, 0.5, 0.3, 0.2, 0.1]
        spatial_decay: 0.5
      n: 100
      snr_db: 0.0
    experiment:
      axis: n                  # n | snr_db | M
      values: [50, 100, 200]
      methods: [ivssf-1, ivssf-2]
      trials: 1000
      seed: 2024
      M: 2
      output: results/fig4.csv
    verify:
      seed: 7
      count: 100

Unknown keys are rejected so typos surface as configuration errors.
"""

from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from ..scenario import ArrayConfig, ScenarioConfig, SignalConfig

SCHEMA_VERSION = 1
METHODS = ("ivssf-1", "ivssf-2")
AXES = ("n", "snr_db", "M")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentSpec:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    axis: str = "n"
    values: list = field(default_factory=lambda: [50, 100, 200])
    methods: list = field(default_factory=lambda: list(METHODS))
    trials: int = 1000
    seed: int = 0
    M: int = 2
    coarse_step: float = 0.01
    fine_step: float = 0.001
    mode: str = "absolute"
    output: str | None = None
    workers: int = 1

    def validate(self):
        if self.axis not in AXES:
            raise ConfigError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.values:
            raise ConfigError("experiment needs at least one axis value")
        if list(self.values) != sorted(self.values):
            raise ConfigError("axis values must be sorted")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if self.mode not in ("absolute", "ratio"):
            raise ConfigError("mode must be 'absolute' or 'ratio'")
        return self


@dataclass
class VerifySpec:
    seed: int = 0
    count: int = 100


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**data)


def scenario_from_dict(data):
    data = dict(data or {})
    try:
        array = _build(ArrayConfig, data.pop("array", None), "scenario.array")
        signal = _build(SignalConfig, data.pop("signal", None), "scenario.signal")
        cfg = _build(ScenarioConfig, data, "scenario")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg.array, cfg.signal = array, signal
    return cfg


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def scenario_to_dict(cfg):
    return _plain(asdict(cfg))


def load_document(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    unknown = set(doc) - {"schema_version", "scenario", "experiment", "verify"}
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys {sorted(unknown)}")
    return doc


def experiment_from_document(doc):
    scenario = scenario_from_dict(doc.get("scenario"))
    exp = dict(doc.get("experiment") or {})
    exp.pop("scenario", None)
    try:
        spec = _build(ExperimentSpec, exp, "experiment")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    spec.scenario = scenario
    return spec.validate()


def load_experiment(path):
    return experiment_from_document(load_document(path))


def load_scenario(path):
    return scenario_from_dict(load_document(path).get("scenario"))


def load_verify(path):
    return _build(VerifySpec, load_document(path).get("verify"), "verify")


def experiment_to_document(spec):
    exp = asdict(spec)
    scenario = exp.pop("scenario")
    return {"schema_version": SCHEMA_VERSION, "scenario": _plain(scenario), "experiment": _plain(exp)}


def dump_experiment(spec, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(experiment_to_document(spec), fh, sort_keys=False)
