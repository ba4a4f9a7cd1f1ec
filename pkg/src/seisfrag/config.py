"""Run configuration: a flat key = value file with one section per stage."""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import MISSING, dataclass, field, fields

import numpy as np

from .errors import ConfigurationError
from .groundmotion import (GMParamDistributions, GroundMotionParams,
                           MarginalSpec, default_gm_distributions)

KNOWN_ESTIMATORS = ("mle", "lr", "segmented", "bmcs", "kde")
KNOWN_IM_KINDS = ("pga", "sa", "psa")


@dataclass
class RunConfig:
    seed: int = 42
    n_motions: int = 100
    dt: float = 0.01
    threads: int = 1
    out_dir: str = "out"

    gm_mode: str = "sample"                       # sample | fixed
    gm_dists: GMParamDistributions = field(default_factory=default_gm_distributions)
    gm_fixed: GroundMotionParams | None = None

    storeys: int = 3
    mass_kg: float = 30000.0
    height_m: float = 3.0
    period_s: float = 0.61
    damping: float = 0.02
    yield_drift: float = 0.007
    hardening: float = 0.01

    im_kinds: tuple = ("pga", "sa")
    sdof_damping: float = 0.02

    motions_dir: str | None = None                # default: <out>/motions
    records_csv: str | None = None                # default: <out>/demand_records.csv

    estimators: tuple = ("mle", "lr", "bmcs", "kde")
    thresholds: tuple = (0.007, 0.015, 0.025)
    grid_points: int = 60
    bin_half_width: float = 0.25
    bin_min_support: int = 30
    bandwidth: str = "normal_reference"           # normal_reference | lscv
    kde_log_scale: bool = True

    boot_estimators: tuple = ("bmcs", "kde")
    replications: int = 100
    level: float = 0.95

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_motions < 1:
            raise ConfigurationError("n_motions must be at least 1")
        if not 0.0 < self.dt <= 0.02:
            raise ConfigurationError("dt must lie in (0, 0.02] s")
        if self.threads < 1:
            raise ConfigurationError("threads must be at least 1")
        if self.gm_mode not in ("sample", "fixed"):
            raise ConfigurationError(f"unknown ground-motion mode {self.gm_mode!r}")
        if self.gm_mode == "fixed" and self.gm_fixed is None:
            raise ConfigurationError("fixed mode needs the six parameter values")
        thr = tuple(float(t) for t in self.thresholds)
        if not thr or any(t <= 0 for t in thr) or list(thr) != sorted(thr):
            raise ConfigurationError("thresholds must be positive and sorted")
        self.thresholds = thr
        for name in self.estimators + self.boot_estimators:
            if name not in KNOWN_ESTIMATORS:
                raise ConfigurationError(f"unknown estimator {name!r}")
        for kind in self.im_kinds:
            if kind not in KNOWN_IM_KINDS:
                raise ConfigurationError(f"unknown IM kind {kind!r}")
        if self.bandwidth not in ("normal_reference", "lscv"):
            raise ConfigurationError(f"unknown bandwidth mode {self.bandwidth!r}")
        if not 0.0 < self.level < 1.0:
            raise ConfigurationError("confidence level must lie in (0, 1)")
        if self.replications < 2:
            raise ConfigurationError("replications must be at least 2")

    def config_hash(self) -> str:
        blob = repr(sorted(self.describe().items())).encode()
        return hashlib.sha256(blob).hexdigest()

    def describe(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, GMParamDistributions):
                for spec in value.marginals():
                    out[f"gm.{spec.name}"] = (spec.family, spec.mean, spec.std,
                                              spec.support)
                if value.correlation is not None:
                    out["gm.correlation"] = value.correlation.tolist()
            elif isinstance(value, GroundMotionParams):
                out["gm.fixed"] = (value.arias_intensity, value.effective_duration,
                                   value.t_mid, value.omega_mid,
                                   value.omega_slope, value.bandwidth_zeta)
            else:
                out[f.name] = value
        return out


def _get(parser, section, key, cast, default):
    if parser.has_option(section, key):
        raw = parser.get(section, key)
        try:
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError:
            raise ConfigurationError(f"[{section}] {key}: cannot parse {raw!r}")
    return default


def _get_list(parser, section, key, default):
    if parser.has_option(section, key):
        return tuple(s.strip() for s in parser.get(section, key).split(",") if s.strip())
    return default


def _marginal_override(parser, base: MarginalSpec, prefix: str) -> MarginalSpec:
    mean = _get(parser, "ground_motion", f"{prefix}_mean", float, base.mean)
    std = _get(parser, "ground_motion", f"{prefix}_std", float, base.std)
    if mean == base.mean and std == base.std:
        return base
    return MarginalSpec(base.family, mean, std, base.support, base.name)


def load_config(path: str) -> RunConfig:
    """Parse a config file; missing keys fall back to defaults."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    cfg = RunConfig.__new__(RunConfig)
    # assign defaults first, then overrides, then validate once
    for f in fields(RunConfig):
        if f.default_factory is not MISSING:
            setattr(cfg, f.name, f.default_factory())
        else:
            setattr(cfg, f.name, f.default)

    cfg.seed = _get(parser, "run", "seed", int, cfg.seed)
    cfg.n_motions = _get(parser, "run", "n_motions", int, cfg.n_motions)
    cfg.dt = _get(parser, "run", "dt", float, cfg.dt)
    cfg.threads = _get(parser, "run", "threads", int, cfg.threads)
    cfg.out_dir = _get(parser, "run", "out", str, cfg.out_dir)

    cfg.gm_mode = _get(parser, "ground_motion", "mode", str, cfg.gm_mode)
    base = default_gm_distributions()
    corr = None
    if parser.has_option("ground_motion", "correlation"):
        corr = np.loadtxt(parser.get("ground_motion", "correlation"),
                          delimiter=",")
    cfg.gm_dists = GMParamDistributions(
        arias_intensity=_marginal_override(parser, base.arias_intensity, "ia"),
        effective_duration=_marginal_override(parser, base.effective_duration, "d595"),
        t_mid=_marginal_override(parser, base.t_mid, "tmid"),
        freq_mid_hz=_marginal_override(parser, base.freq_mid_hz, "freq_mid"),
        freq_slope_hz=_marginal_override(parser, base.freq_slope_hz, "freq_slope"),
        bandwidth_zeta=_marginal_override(parser, base.bandwidth_zeta, "zeta_f"),
        correlation=corr)
    if cfg.gm_mode == "fixed":
        try:
            cfg.gm_fixed = GroundMotionParams(
                arias_intensity=parser.getfloat("ground_motion", "ia"),
                effective_duration=parser.getfloat("ground_motion", "d595"),
                t_mid=parser.getfloat("ground_motion", "t_mid"),
                omega_mid=2 * math.pi * parser.getfloat("ground_motion", "freq_mid_hz"),
                omega_slope=2 * math.pi * parser.getfloat("ground_motion", "freq_slope_hz"),
                bandwidth_zeta=parser.getfloat("ground_motion", "zeta_f"),
            )
        except (configparser.Error, ValueError) as exc:
            raise ConfigurationError(f"fixed ground-motion parameters: {exc}")

    cfg.storeys = _get(parser, "structure", "storeys", int, cfg.storeys)
    cfg.mass_kg = _get(parser, "structure", "mass_kg", float, cfg.mass_kg)
    cfg.height_m = _get(parser, "structure", "height_m", float, cfg.height_m)
    cfg.period_s = _get(parser, "structure", "period_s", float, cfg.period_s)
    cfg.damping = _get(parser, "structure", "damping", float, cfg.damping)
    cfg.yield_drift = _get(parser, "structure", "yield_drift", float, cfg.yield_drift)
    cfg.hardening = _get(parser, "structure", "hardening", float, cfg.hardening)

    cfg.im_kinds = _get_list(parser, "intensity", "im_kinds", cfg.im_kinds)
    cfg.sdof_damping = _get(parser, "intensity", "sdof_damping", float, cfg.sdof_damping)

    cfg.motions_dir = _get(parser, "simulate", "motions", str, cfg.motions_dir)
    cfg.records_csv = _get(parser, "fit", "records", str, cfg.records_csv)

    cfg.estimators = _get_list(parser, "fragility", "estimators", cfg.estimators)
    if parser.has_option("fragility", "thresholds"):
        cfg.thresholds = tuple(float(s) for s in
                               _get_list(parser, "fragility", "thresholds", ()))
    cfg.grid_points = _get(parser, "fragility", "grid_points", int, cfg.grid_points)
    cfg.bin_half_width = _get(parser, "fragility", "bin_half_width", float,
                              cfg.bin_half_width)
    cfg.bin_min_support = _get(parser, "fragility", "bin_min_support", int,
                               cfg.bin_min_support)
    cfg.bandwidth = _get(parser, "fragility", "bandwidth", str, cfg.bandwidth)
    cfg.kde_log_scale = _get(parser, "fragility", "kde_log_scale", bool,
                             cfg.kde_log_scale)

    cfg.boot_estimators = _get_list(parser, "bootstrap", "estimators",
                                    cfg.boot_estimators)
    cfg.replications = _get(parser, "bootstrap", "replications", int,
                            cfg.replications)
    cfg.level = _get(parser, "bootstrap", "level", float, cfg.level)

    cfg.validate()
    return cfg
