"""Experiment configuration and YAML loading.

Schema (all sections optional; omitted keys keep their defaults)::

    comm:       CommConfig fields
    radar:      RadarConfig fields
    processing: {cfar2d: {train, guard, pfa}, cfar1d: {...}, nms_window,
                 clutter_removal, window, leakage_margin_db}
    scenario:   ScenarioConfig fields
    layout:     {eta, M_g}
    estimator:  {rho, k_max, init, noise_stop}
    experiment: {snr_db, scenes, seed, support_noise, threads}
    sweep:      {snr_db: [...], eta: [...]}
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .errors import ConfigError
from .otfs_modem import CommConfig, FrameLayout
from .radar import CfarParams, ProcessingParams, RadarConfig
from .scenario import ScenarioConfig

PRESETS = ("desk", "paper")


@dataclass(frozen=True)
class EstimatorParams:
    rho: float = 2.0
    k_max: int | None = None  # None -> 2 * expected path count
    init: str = "ls"
    noise_stop: bool = True

    def __post_init__(self):
        if self.rho < 1:
            raise ConfigError(f"rho must be >= 1, got {self.rho}")
        if self.init not in ("ls", "zero"):
            raise ConfigError(f"estimator.init must be 'ls' or 'zero', got {self.init!r}")
        if self.k_max is not None and self.k_max < 0:
            raise ConfigError("k_max must be nonnegative")


@dataclass(frozen=True)
class ExperimentConfig:
    comm: CommConfig = CommConfig()
    radar: RadarConfig = RadarConfig()
    processing: ProcessingParams = ProcessingParams()
    scenario: ScenarioConfig = ScenarioConfig()
    estimator: EstimatorParams = EstimatorParams()
    eta: float = 0.2
    M_g: int = 8
    snr_db: float = 10.0
    scenes: int = 200
    seed: int = 0
    support_noise: float = 0.0
    threads: int = 1
    sweep_snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0)
    sweep_eta: tuple = (0.1, 0.15, 0.2, 0.25, 0.3)

    def __post_init__(self):
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        if not 0 <= self.support_noise <= 1:
            raise ConfigError("support_noise must lie in [0, 1]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for eta in (self.eta, *self.sweep_eta):
            lay = self.layout(eta)
            if lay.M_p == 0:
                raise ConfigError(f"eta={eta} gives no pilot rows")

    def layout(self, eta: float | None = None) -> FrameLayout:
        return FrameLayout.from_eta(self.comm.M, self.eta if eta is None else eta, self.M_g)

    @property
    def plain_k_max(self) -> int:
        if self.estimator.k_max is not None:
            return self.estimator.k_max
        return 2 * self.scenario.expected_paths


def _coerce(value, annotation: str):
    ann = annotation.replace(" ", "")
    if value is None:
        return None
    if ann.startswith("float"):
        return float(value)
    if ann.startswith("int"):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected an integer, got {value}")
        return int(value)
    if ann.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}")
        return value
    if ann.startswith("tuple"):
        return tuple(float(v) for v in value)
    return value


def _build(cls, data: dict | None, base=None):
    """Instantiate a frozen dataclass from a mapping, rejecting unknown keys."""
    base = cls() if base is None else base
    if not data:
        return base
    if not isinstance(data, dict):
        raise ConfigError(f"section for {cls.__name__} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        ann = fields[key].type
        if cls is ProcessingParams and key in ("cfar2d", "cfar1d"):
            kwargs[key] = _build(CfarParams, value, getattr(base, key))
        else:
            try:
                kwargs[key] = _coerce(value, ann)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{cls.__name__}.{key}: {exc}") from None
    return dataclasses.replace(base, **kwargs)


def config_from_dict(doc: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    base = ExperimentConfig() if base is None else base
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    known = {"comm", "radar", "processing", "scenario", "layout", "estimator", "experiment", "sweep"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    kw = {
        "comm": _build(CommConfig, doc.get("comm"), base.comm),
        "radar": _build(RadarConfig, doc.get("radar"), base.radar),
        "processing": _build(ProcessingParams, doc.get("processing"), base.processing),
        "scenario": _build(ScenarioConfig, doc.get("scenario"), base.scenario),
        "estimator": _build(EstimatorParams, doc.get("estimator"), base.estimator),
    }
    flat = {}
    for section, allowed in (("layout", {"eta", "M_g"}),
                             ("experiment", {"snr_db", "scenes", "seed", "support_noise", "threads"})):
        part = doc.get(section) or {}
        bad = set(part) - allowed
        if bad:
            raise ConfigError(f"unknown {section} keys: {sorted(bad)}")
        flat.update(part)
    sweep = doc.get("sweep") or {}
    bad = set(sweep) - {"snr_db", "eta"}
    if bad:
        raise ConfigError(f"unknown sweep keys: {sorted(bad)}")
    if "snr_db" in sweep:
        flat["sweep_snr_db"] = sweep["snr_db"]
    if "eta" in sweep:
        flat["sweep_eta"] = sweep["eta"]
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    for key, value in flat.items():
        kw[key] = _coerce(value, types[key])
    return dataclasses.replace(base, **kw)


def load_config(source: str | Path) -> ExperimentConfig:
    """Load a YAML file, or a bundled preset by name (``desk`` / ``paper``)."""
    if str(source) in PRESETS:
        text = resources.files("otfs_sensing.configs").joinpath(f"{source}.yaml").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
    try:
        doc = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from None
    return config_from_dict(doc)
