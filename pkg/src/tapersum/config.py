"""YAML run configuration for the command-line interface.

Layout (every key optional; omitted keys take the defaults below)::

    seed: 12345
    workers: 1
    output_dir: tapersum_out
    formats: [csv, json]
    moments:  {alpha: 1.5, b: 10000.0, r: [1.0, 2.0]}
    sample:   {alpha: 1.5, b: 10.0, size: 1000, coupled: false}
    classify: {alpha: 1.5, beta: 0.75, gamma: 0.2, zero_sum: false}
    simulate:
      alpha: 1.5
      gamma: 0.2
      filter: {kind: power_law, beta: 0.75, c_a: 1.0}
      n: 4096
      t_grid: [0.25, 0.5, 1.0]
      replicates: 2000
      truncation_J: null        # null: chosen from the filter tail
      normalization: exact_stddev
      method: auto
    verify:   {suite: moments, fast: false}
    report:   {input_dir: null}  # null: the output directory

Unknown keys anywhere raise :class:`ConfigError`.
"""

import os
from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import TaperSumError

OUTPUT_DIR_ENV = "TAPERSUM_OUTPUT_DIR"
FORMATS = ("csv", "json")


class ConfigError(TaperSumError, ValueError):
    """Malformed or unknown configuration entries."""


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        sub = _SECTIONS.get(known[k].type) if isinstance(known[k].type, str) else None
        kwargs[k] = _build(sub, v, f"{where}.{k}") if sub else v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class MomentsConfig:
    alpha: float = 1.5
    b: float = 1e4
    r: list = field(default_factory=lambda: [1.0, 2.0])


@dataclass
class SampleConfig:
    alpha: float = 1.5
    b: float = 10.0
    size: int = 1000
    coupled: bool = False


@dataclass
class ClassifyConfig:
    alpha: float = 1.5
    beta: float = 0.75
    gamma: float = 0.2
    zero_sum: bool = False


@dataclass
class SimulateConfig:
    alpha: float = 1.5
    gamma: float = 0.2
    filter: dict = field(default_factory=lambda: {"kind": "power_law", "beta": 0.75, "c_a": 1.0})
    n: int = 4096
    t_grid: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    replicates: int = 2000
    truncation_J: int | None = None
    normalization: str = "exact_stddev"
    method: str = "auto"


@dataclass
class VerifyConfig:
    suite: str = "moments"
    fast: bool = False


@dataclass
class ReportConfig:
    input_dir: str | None = None


@dataclass
class RunConfig:
    seed: int = 12345
    workers: int = 1
    output_dir: str = "tapersum_out"
    formats: list = field(default_factory=lambda: list(FORMATS))
    moments: "MomentsConfig" = field(default_factory=MomentsConfig)
    sample: "SampleConfig" = field(default_factory=SampleConfig)
    classify: "ClassifyConfig" = field(default_factory=ClassifyConfig)
    simulate: "SimulateConfig" = field(default_factory=SimulateConfig)
    verify: "VerifyConfig" = field(default_factory=VerifyConfig)
    report: "ReportConfig" = field(default_factory=ReportConfig)

    def __post_init__(self):
        bad = [f for f in self.formats if f not in FORMATS]
        if bad:
            raise ConfigError(f"unknown output formats {bad}; choose from {list(FORMATS)}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError(f"workers must be a positive integer, got {self.workers}")

    @classmethod
    def from_dict(cls, data):
        return _build(cls, data, "config")

    def to_dict(self):
        return asdict(self)

    def resolved_output_dir(self, override=None):
        """Command-line flag, then the environment variable, then the config value."""
        return override or os.environ.get(OUTPUT_DIR_ENV) or self.output_dir


_SECTIONS = {
    "MomentsConfig": MomentsConfig,
    "SampleConfig": SampleConfig,
    "ClassifyConfig": ClassifyConfig,
    "SimulateConfig": SimulateConfig,
    "VerifyConfig": VerifyConfig,
    "ReportConfig": ReportConfig,
}


def loads(text):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return RunConfig.from_dict(data or {})


def dumps(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def load(path):
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def dump(cfg, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))
