"""Experiment configuration: nested YAML mapping onto dataclasses.

Precedence when the CLI builds a config: ``--set`` and dedicated flags,
then the config file, then the defaults defined here.
"""

from __future__ import annotations

import copy
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .baselines import DEFAULT_ENSEMBLE_MEMBERS

DEFAULT_ROSTER = ("majority", "random", "logreg", "gnb", "knn", "tree", "forest", "linsvm",
                  "mlp", "pg-mlp", "ensemble")

OUT_ENV = "THERMOBENCH_OUT"


class ConfigError(ValueError):
    pass


@dataclass
class SyntheticSection:
    start_year: int = 2008
    end_year: int = 2012
    countries: int = 3
    base_demand: float = 50.0
    seasonal_amplitude: float = 30.0
    diurnal_amplitude: float = 10.0
    noise_std: float = 8.0
    t_sink: float = 318.15
    t_source_mean: float = 283.15
    t_source_amplitude: float = 10.0
    seed: int = 0


@dataclass
class DataSection:
    source: str = "synthetic"            # "synthetic" or "file"
    path: str | None = None
    delimiter: str = ";"
    timestamp_column: str = "utc_timestamp"
    missing: str = "drop-row"
    allow_gaps: bool = False
    synthetic: SyntheticSection = field(default_factory=SyntheticSection)


@dataclass
class RolesSection:
    target_country: str | None = None    # default: first country tag in the table
    heat_demand: str | None = None
    t_sink: str | None = None
    t_source: str | None = None
    cop: str | None = None
    power_input: str | None = None
    exclude: list = field(default_factory=list)


@dataclass
class SplitSection:
    train: list = field(default_factory=lambda: [2008, 2010])
    val: list = field(default_factory=lambda: [2011, 2011])
    test: list = field(default_factory=lambda: [2012, 2012])


@dataclass
class LabelingSection:
    mode: str = "train-fit"              # or "global"
    iqr_factor: float | None = 1.5       # None disables filtering


@dataclass
class SelectionSection:
    k: int = 64
    bins: int = 16
    max_rows: int | None = 20000
    rfe_step: int = 1
    forest: dict = field(default_factory=lambda: {"n_trees": 50})
    rfe: dict = field(default_factory=lambda: {"epochs": 300})


@dataclass
class EnsembleSection:
    members: list = field(default_factory=lambda: list(DEFAULT_ENSEMBLE_MEMBERS))
    weights: list | None = None


@dataclass
class ModelsSection:
    roster: list = field(default_factory=lambda: list(DEFAULT_ROSTER))
    hyper: dict = field(default_factory=dict)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)


@dataclass
class PhysicsSection:
    lambda_physics: float = 0.1
    lambda_energy: float = 0.05
    mode: str = "literal"
    reduction: str = "mean"
    energy_scale: str | float = "train-mean"   # divide heat/power by mean train heat demand


@dataclass
class OutputSection:
    dir: str | None = None
    checkpoints: bool = False


@dataclass
class EvaluationSection:
    significance_threshold: float = 1.96
    pareto_objectives: list = field(default_factory=lambda: ["test_acc", "efficiency"])


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    data: DataSection = field(default_factory=DataSection)
    roles: RolesSection = field(default_factory=RolesSection)
    split: SplitSection = field(default_factory=SplitSection)
    labeling: LabelingSection = field(default_factory=LabelingSection)
    selection: SelectionSection = field(default_factory=SelectionSection)
    models: ModelsSection = field(default_factory=ModelsSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    seeds: list = field(default_factory=lambda: list(range(10)))
    workers: int = 1
    output: OutputSection = field(default_factory=OutputSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    ablation: list = field(default_factory=list)

    def validate(self):
        if not self.models.roster:
            raise ConfigError("model roster is empty")
        if len(set(self.seeds)) != len(self.seeds) or not self.seeds:
            raise ConfigError("seeds must be a nonempty list of distinct integers")
        if self.labeling.mode not in ("train-fit", "global"):
            raise ConfigError(f"unknown labeling mode {self.labeling.mode!r}")
        if self.data.source not in ("synthetic", "file"):
            raise ConfigError(f"unknown data source {self.data.source!r}")
        if self.data.source == "file" and not self.data.path:
            raise ConfigError("data.path is required for file sources")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.physics.mode not in ("literal", "hinge"):
            raise ConfigError(f"unknown physics mode {self.physics.mode!r}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None) -> "ExperimentConfig":
        return _build(cls, d or {}, "").validate()

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        d = self.to_dict()
        for key, value in overrides.items():
            set_dotted(d, key, value)
        return ExperimentConfig.from_dict(d)

    def output_dir(self) -> Path:
        if self.output.dir:
            return Path(self.output.dir)
        root = os.environ.get(OUT_ENV, "runs")
        return Path(root) / self.name


def _build(cls, d, prefix):
    if not isinstance(d, dict):
        raise ConfigError(f"{prefix or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys under {prefix or '<root>'}: {sorted(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, f in known.items():
        if name not in d:
            continue
        default = getattr(defaults, name)
        value = d[name]
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value or {}, f"{prefix}{name}.")
        else:
            kwargs[name] = copy.deepcopy(value)
    return cls(**kwargs)


def set_dotted(d: dict, key: str, value):
    """Set ``a.b.c`` in a nested dict, creating plain dicts as needed."""
    parts = key.split(".")
    cur = d
    for p in parts[:-1]:
        if p not in cur or cur[p] is None:
            cur[p] = {}
        cur = cur[p]
        if not isinstance(cur, dict):
            raise ConfigError(f"cannot set {key}: {p} is not a mapping")
    cur[parts[-1]] = value


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if "name" not in raw:
        raw["name"] = path.stem
    return ExperimentConfig.from_dict(raw)


def dump_config(cfg: ExperimentConfig, path):
    Path(path).write_text(yaml.safe_dump(cfg.to_dict(), sort_keys=False))
