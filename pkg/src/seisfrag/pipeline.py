"""End-to-end stages: generate, simulate, fit, bootstrap.

Each stage is a pure function of (config, inputs) with deterministic
outputs: work items derive their random streams from (seed, item index),
workers may run in any process layout, and results are merged by index
before anything is written.  CSV cells carry 9 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bootstrap import bootstrap_curves, median_im_logstd
from .config import RunConfig
from .errors import DataError, SeisfragError
from .groundmotion import (frequency_clipped, sample_gm_params, solve_modulator,
                           synthesize)
from .intensity import DemandRecord, IMRecord, im_record
from .motion import Accelerogram, ingest_recorded, write_accelerogram
from .nonparametric import (BinSpec, FragilityCurve, bandwidth_lscv_2d,
                            bandwidth_normal_reference, bmcs_fragility,
                            default_im_grid, kde_fragility)
from .parametric import (fit_linear_demand, fit_mle, fit_segmented,
                         lognormal_eval, lr_to_fragility, segmented_to_fragility)
from .streams import RandomStream
from .structure import ShearFrameModel, max_interstorey_drift, \
    integrate, uniform_shear_frame

STAGE_GENERATE = 0
STAGE_BOOTSTRAP = 1
MAX_REDRAWS = 10

RECORD_COLUMNS = ("motion_id", "pga_g", "sa_g", "psa_g", "arias_sg",
                  "d595_s", "delta_max")
SUMMARY_COLUMNS = ("motion_id", "ia_sg", "d595_s", "t_mid_s", "freq_mid_hz",
                   "freq_slope_hz", "zeta_f", "emp_arias_sg", "emp_d595_s",
                   "emp_t45_s", "pga_g", "clipped")


def fmt(value) -> str:
    """9-significant-digit cell formatting; NaN spelled out."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    return "nan" if math.isnan(v) else f"{v:.9g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


@dataclass
class RunManifest:
    """Reproducibility metadata: config hash, timings, collected warnings."""

    config_hash: str
    version: str = __version__
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def save(self, out_dir) -> None:
        path = os.path.join(out_dir, "manifest.json")
        merged = {"config_hash": self.config_hash, "version": self.version,
                  "timings": self.timings, "warnings": self.warnings,
                  "counts": self.counts}
        if os.path.exists(path):
            with open(path) as fh:
                previous = json.load(fh)
            if previous.get("config_hash") == self.config_hash:
                merged["timings"] = {**previous.get("timings", {}), **self.timings}
                merged["warnings"] = previous.get("warnings", []) + self.warnings
                merged["counts"] = {**previous.get("counts", {}), **self.counts}
        with open(path, "w") as fh:
            json.dump(merged, fh, indent=2)


def build_model(cfg: RunConfig) -> ShearFrameModel:
    return uniform_shear_frame(storeys=cfg.storeys, mass=cfg.mass_kg,
                               height=cfg.height_m, period=cfg.period_s,
                               damping=cfg.damping, yield_drift=cfg.yield_drift,
                               hardening=cfg.hardening)


def _pmap(func, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunk = max(1, len(items) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items, chunksize=chunk))


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def _draw_feasible_params(cfg: RunConfig, motion_stream: RandomStream):
    """Sample parameters, redrawing when the descriptors are infeasible."""
    if cfg.gm_mode == "fixed":
        solve_modulator(cfg.gm_fixed.arias_intensity,
                        cfg.gm_fixed.effective_duration, cfg.gm_fixed.t_mid)
        return cfg.gm_fixed, 0
    last = None
    for attempt in range(MAX_REDRAWS):
        params = sample_gm_params(cfg.gm_dists, motion_stream.child(2 * attempt))
        try:
            solve_modulator(params.arias_intensity, params.effective_duration,
                            params.t_mid)
            return params, attempt
        except SeisfragError as exc:
            last = exc
    raise DataError(f"no feasible parameter draw in {MAX_REDRAWS} attempts: {last}")


def _generate_one(args):
    cfg, index, motions_dir = args
    stream = RandomStream(cfg.seed, STAGE_GENERATE).child(index)
    params, redraws = _draw_feasible_params(cfg, stream)
    motion_id = f"motion_{index:05d}"
    acc = synthesize(params, stream.child(2 * redraws + 1), dt=cfg.dt,
                     label=motion_id)
    coeffs = solve_modulator(params.arias_intensity, params.effective_duration,
                             params.t_mid)
    clipped = frequency_clipped(params, coeffs.total_duration)
    write_accelerogram(acc, os.path.join(motions_dir, f"{motion_id}.txt"))
    im = im_record(acc, period=cfg.period_s, zeta=cfg.sdof_damping)
    row = (motion_id, params.arias_intensity, params.effective_duration,
           params.t_mid, params.omega_mid / (2 * math.pi),
           params.omega_slope / (2 * math.pi), params.bandwidth_zeta,
           im.arias, im.d595, im.t_mid_emp, im.pga, int(clipped))
    warnings = []
    if clipped:
        warnings.append(f"{motion_id}: frequency law clipped at the floor")
    if redraws:
        warnings.append(f"{motion_id}: {redraws} infeasible draws redrawn")
    return index, row, warnings


def cmd_generate(cfg: RunConfig) -> dict:
    """Write N synthetic motions and a per-motion summary CSV."""
    t0 = time.perf_counter()
    motions_dir = os.path.join(cfg.out_dir, "motions")
    os.makedirs(motions_dir, exist_ok=True)
    results = _pmap(_generate_one,
                    [(cfg, i, motions_dir) for i in range(cfg.n_motions)],
                    cfg.threads)
    results.sort(key=lambda r: r[0])
    rows = [r[1] for r in results]
    warnings = [w for r in results for w in r[2]]
    summary = os.path.join(cfg.out_dir, "gm_params.csv")
    write_csv(summary, SUMMARY_COLUMNS, rows)
    manifest = RunManifest(cfg.config_hash())
    manifest.timings["generate"] = time.perf_counter() - t0
    manifest.warnings.extend(warnings)
    manifest.counts["motions"] = cfg.n_motions
    manifest.save(cfg.out_dir)
    return {"summary": summary, "motions_dir": motions_dir,
            "n_motions": cfg.n_motions, "warnings": warnings}


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def analyze_motion(acc: Accelerogram, model: ShearFrameModel,
                   period: float, sdof_zeta: float,
                   motion_id: str) -> DemandRecord:
    """One transient analysis reduced to a demand record."""
    im = im_record(acc, period=period, zeta=sdof_zeta)
    resp = integrate(model, acc)
    delta = max_interstorey_drift(resp, model.heights)
    return DemandRecord(im=im, delta=delta, motion_id=motion_id)


def _simulate_one(args):
    cfg, index, path, units = args
    motion_id = os.path.splitext(os.path.basename(path))[0]
    try:
        acc = ingest_recorded(path, units=units)
        model = build_model(cfg)
        rec = analyze_motion(acc, model, cfg.period_s, cfg.sdof_damping, motion_id)
        row = (rec.motion_id, rec.im.pga, rec.im.sa, rec.im.psa,
               rec.im.arias, rec.im.d595, rec.delta)
        return index, row, None
    except (SeisfragError, OSError, ValueError) as exc:
        return index, None, f"{motion_id}: {exc}"


def list_motion_files(motions_dir) -> list:
    try:
        names = sorted(os.listdir(motions_dir))
    except OSError as exc:
        raise DataError(f"cannot list motions: {exc}")
    return [os.path.join(motions_dir, n) for n in names if n.endswith(".txt")]


def cmd_simulate(cfg: RunConfig, motion_paths=None, units=None) -> dict:
    """Run transient analyses and write the demand-records CSV."""
    t0 = time.perf_counter()
    if motion_paths is None:
        motions_dir = cfg.motions_dir or os.path.join(cfg.out_dir, "motions")
        motion_paths = list_motion_files(motions_dir)
    if not motion_paths:
        raise DataError("no motion files to simulate")
    os.makedirs(cfg.out_dir, exist_ok=True)
    results = _pmap(_simulate_one,
                    [(cfg, i, p, units) for i, p in enumerate(motion_paths)],
                    cfg.threads)
    results.sort(key=lambda r: r[0])
    rows = [r[1] for r in results if r[1] is not None]
    failures = [r[2] for r in results if r[2] is not None]
    records_csv = os.path.join(cfg.out_dir, "demand_records.csv")
    write_csv(records_csv, RECORD_COLUMNS, rows)
    manifest = RunManifest(cfg.config_hash())
    manifest.timings["simulate"] = time.perf_counter() - t0
    manifest.warnings.extend(f"simulate failure: {f}" for f in failures)
    # diagnostic only: pseudo- vs true spectral acceleration spread
    spreads = [abs(r[3] - r[2]) / r[2] for r in rows if r[2] > 0]
    if spreads and max(spreads) > 0.10:
        manifest.warnings.append(
            f"Psa deviates from Sa by up to {max(spreads):.1%}")
    manifest.counts["analyses_ok"] = len(rows)
    manifest.counts["analyses_failed"] = len(failures)
    manifest.save(cfg.out_dir)
    return {"records": records_csv, "n_ok": len(rows),
            "n_failed": len(failures), "failures": failures}


def read_records_csv(path) -> list:
    """Load demand records written by cmd_simulate."""
    records = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"cannot read records CSV: {exc}")
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(RECORD_COLUMNS):
            raise DataError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            im = IMRecord(pga=float(row["pga_g"]), sa=float(row["sa_g"]),
                          psa=float(row["psa_g"]), arias=float(row["arias_sg"]),
                          d595=float(row["d595_s"]), t_mid_emp=math.nan)
            records.append(DemandRecord(im=im, delta=float(row["delta_max"]),
                                        motion_id=row["motion_id"]))
    if not records:
        raise DataError(f"{path}: no records")
    return records


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _threshold_tag(delta_o: float) -> str:
    return f"{delta_o:g}".replace(".", "p")


def _curve_from_lognormal(curve, grid) -> FragilityCurve:
    return FragilityCurve(im_grid=grid,
                          probabilities=lognormal_eval(curve, grid),
                          method="lognormal", im_kind=curve.im_kind,
                          threshold=curve.threshold, notes=curve.notes)


def make_estimator(name: str, im_kind: str, delta_o: float, cfg: RunConfig,
                   records):
    """Freeze hyperparameters from the full data set; return the callable.

    The IM grid, bin spec, and KDE bandwidths are fixed here so bootstrap
    replicates all share them.  Returns (estimator, setup_notes).
    """
    im_values = np.array([r.im.value(im_kind) for r in records])
    grid = default_im_grid(im_values, cfg.grid_points)
    notes: tuple = ()
    if name == "mle":
        def estimator(recs):
            return _curve_from_lognormal(fit_mle(recs, delta_o, im_kind), grid)
    elif name == "lr":
        def estimator(recs):
            fit = fit_linear_demand(recs, im_kind)
            return _curve_from_lognormal(lr_to_fragility(fit, delta_o, im_kind),
                                         grid)
    elif name == "segmented":
        def estimator(recs):
            fit = fit_segmented(recs, im_kind)
            return FragilityCurve(
                im_grid=grid,
                probabilities=segmented_to_fragility(fit, delta_o, grid),
                method="segmented", im_kind=im_kind, threshold=delta_o,
                notes=fit.notes)
    elif name == "bmcs":
        spec = BinSpec(h_rel=cfg.bin_half_width, n_min=cfg.bin_min_support)

        def estimator(recs):
            return bmcs_fragility(recs, delta_o, grid, spec, im_kind)
    elif name == "kde":
        deltas = np.array([r.delta for r in records])
        if cfg.kde_log_scale:
            if np.any(im_values <= 0) or np.any(deltas <= 0):
                raise DataError("log-scale KDE needs positive IM and drifts")
            pairs = np.column_stack([np.log(deltas), np.log(im_values)])
            h = bandwidth_normal_reference(np.log(im_values), dim=1)
        else:
            pairs = np.column_stack([deltas, im_values])
            h = bandwidth_normal_reference(im_values, dim=1)
        if cfg.bandwidth == "lscv":
            H = bandwidth_lscv_2d(pairs)
            notes = H.notes
        else:
            H = bandwidth_normal_reference(pairs, dim=2)

        def estimator(recs):
            return kde_fragility(recs, delta_o, grid, h, H,
                                 log_scale=cfg.kde_log_scale, im_kind=im_kind)
    else:
        raise DataError(f"unknown estimator {name!r}")
    return estimator, notes


def _params_rows(name, im_kind, records, thresholds):
    """Parameter-CSV rows for a parametric estimator."""
    rows = []
    header = None
    if name == "mle":
        header = ("delta_o", "alpha_g", "beta")
        for delta_o in thresholds:
            curve = fit_mle(records, delta_o, im_kind)
            rows.append((delta_o, curve.alpha, curve.beta))
    elif name == "lr":
        header = ("delta_o", "alpha_g", "beta", "A", "B", "zeta", "r2")
        fit = fit_linear_demand(records, im_kind)
        for delta_o in thresholds:
            curve = lr_to_fragility(fit, delta_o, im_kind)
            rows.append((delta_o, curve.alpha, curve.beta, fit.A, fit.B,
                         fit.zeta_res, fit.r2))
    elif name == "segmented":
        header = ("delta_o", "break_g", "A1", "B1", "zeta1", "r2_1",
                  "A2", "B2", "zeta2", "r2_2")
        fit = fit_segmented(records, im_kind)
        s1, s2 = fit.segments
        for delta_o in thresholds:
            rows.append((delta_o, fit.break_im, s1.A, s1.B, s1.zeta_res, s1.r2,
                         s2.A, s2.B, s2.zeta_res, s2.r2))
    return header, rows


def cmd_fit(cfg: RunConfig, records_csv=None, plot: bool = False) -> dict:
    """Estimate fragility curves for every configured combination."""
    t0 = time.perf_counter()
    records_csv = records_csv or cfg.records_csv \
        or os.path.join(cfg.out_dir, "demand_records.csv")
    records = read_records_csv(records_csv)
    frag_dir = os.path.join(cfg.out_dir, "fragility")
    os.makedirs(frag_dir, exist_ok=True)
    outputs = []
    warnings = []
    curves_by_family: dict = {}
    for im_kind in cfg.im_kinds:
        for name in cfg.estimators:
            try:
                header, rows = _params_rows(name, im_kind, records, cfg.thresholds)
                if header:
                    path = os.path.join(frag_dir, f"params_{name}_{im_kind}.csv")
                    write_csv(path, header, rows)
                    outputs.append(path)
                for delta_o in cfg.thresholds:
                    estimator, setup_notes = make_estimator(
                        name, im_kind, delta_o, cfg, records)
                    curve = estimator(records)
                    tag = _threshold_tag(delta_o)
                    path = os.path.join(frag_dir,
                                        f"frag_{name}_{im_kind}_d{tag}.csv")
                    if curve.support is not None:
                        write_csv(path, ("im_g", "probability", "support_count"),
                                  zip(curve.im_grid, curve.probabilities,
                                      curve.support))
                    else:
                        write_csv(path, ("im_g", "probability"),
                                  zip(curve.im_grid, curve.probabilities))
                    outputs.append(path)
                    for note in curve.notes + setup_notes:
                        warnings.append(f"{name}/{im_kind}/{delta_o:g}: {note}")
                    curves_by_family.setdefault((im_kind, delta_o), {})[name] = curve
            except SeisfragError as exc:
                warnings.append(f"fit skipped {name}/{im_kind}: {exc}")
    if plot:
        from .plotting import save_fragility_figure
        for (im_kind, delta_o), curves in curves_by_family.items():
            tag = _threshold_tag(delta_o)
            path = os.path.join(frag_dir, f"frag_{im_kind}_d{tag}.svg")
            save_fragility_figure(
                curves, path,
                title=f"{im_kind.upper()}, threshold {delta_o:g}")
            outputs.append(path)
    manifest = RunManifest(cfg.config_hash())
    manifest.timings["fit"] = time.perf_counter() - t0
    manifest.warnings.extend(warnings)
    manifest.counts["fit_outputs"] = len(outputs)
    manifest.save(cfg.out_dir)
    return {"outputs": outputs, "warnings": warnings}


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------

def cmd_bootstrap(cfg: RunConfig, records_csv=None, plot: bool = False) -> dict:
    """Bootstrap the configured estimators; write band and median-IM CSVs."""
    t0 = time.perf_counter()
    records_csv = records_csv or cfg.records_csv \
        or os.path.join(cfg.out_dir, "demand_records.csv")
    records = read_records_csv(records_csv)
    boot_dir = os.path.join(cfg.out_dir, "bootstrap")
    os.makedirs(boot_dir, exist_ok=True)
    outputs = []
    warnings = []
    summary_rows = []
    combo = 0
    for im_kind in cfg.im_kinds:
        for name in cfg.boot_estimators:
            for delta_o in cfg.thresholds:
                base = RandomStream(cfg.seed, STAGE_BOOTSTRAP).child(combo)
                combo += 1
                try:
                    estimator, setup_notes = make_estimator(
                        name, im_kind, delta_o, cfg, records)
                    original = estimator(records)
                    ensemble = bootstrap_curves(records, estimator,
                                                cfg.replications, base,
                                                level=cfg.level, name=name)
                except SeisfragError as exc:
                    warnings.append(f"bootstrap skipped {name}/{im_kind}"
                                    f"/{delta_o:g}: {exc}")
                    continue
                tag = _threshold_tag(delta_o)
                stem = f"boot_{name}_{im_kind}_d{tag}"
                path = os.path.join(boot_dir, f"{stem}.csv")
                write_csv(path, ("im_g", "median", "lower", "upper", "n_valid"),
                          zip(ensemble.im_grid, ensemble.median.probabilities,
                              ensemble.lower.probabilities,
                              ensemble.upper.probabilities,
                              ensemble.valid_counts))
                outputs.append(path)
                path = os.path.join(boot_dir, f"{stem}_median_im.csv")
                write_csv(path, ("replicate", "median_im_g"),
                          enumerate(ensemble.median_im_samples))
                outputs.append(path)
                if ensemble.n_failed:
                    warnings.append(f"{name}/{im_kind}/{delta_o:g}: "
                                    f"{ensemble.n_failed} replicates failed")
                for note in setup_notes:
                    warnings.append(f"{name}/{im_kind}/{delta_o:g}: {note}")
                try:
                    stats = median_im_logstd(ensemble)
                    summary_rows.append((name, im_kind, delta_o,
                                         stats.n_valid, stats.log_std))
                except DataError as exc:
                    warnings.append(f"median-IM stats {name}/{im_kind}"
                                    f"/{delta_o:g}: {exc}")
                if plot:
                    from .plotting import save_bootstrap_figure
                    path = os.path.join(boot_dir, f"{stem}.svg")
                    save_bootstrap_figure(
                        ensemble, original, path,
                        title=f"{name} bootstrap, {im_kind.upper()}, "
                              f"threshold {delta_o:g}")
                    outputs.append(path)
    if summary_rows:
        path = os.path.join(boot_dir, "boot_summary.csv")
        write_csv(path, ("estimator", "im_kind", "delta_o", "n_valid",
                         "median_im_logstd"), summary_rows)
        outputs.append(path)
    manifest = RunManifest(cfg.config_hash())
    manifest.timings["bootstrap"] = time.perf_counter() - t0
    manifest.warnings.extend(warnings)
    manifest.counts["bootstrap_outputs"] = len(outputs)
    manifest.save(cfg.out_dir)
    return {"outputs": outputs, "warnings": warnings}


def cmd_pipeline(cfg: RunConfig, plot: bool = False) -> dict:
    """All stages in sequence on one output directory."""
    out = {"generate": cmd_generate(cfg)}
    out["simulate"] = cmd_simulate(cfg)
    out["fit"] = cmd_fit(cfg, plot=plot)
    out["bootstrap"] = cmd_bootstrap(cfg, plot=plot)
    return out
