"""Bootstrap quantification of fragility-estimator uncertainty.

Any estimator with fixed hyperparameters (grid, bandwidths, bin spec)
can be resampled; per-grid-point order statistics skip undefined points
and failed replicates are reported, not imputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, EnsembleError, SeisfragError
from .nonparametric import FragilityCurve
from .streams import RandomStream


@dataclass(frozen=True)
class MedianIMStats:
    """Dispersion of the bootstrap median-IM distribution (log scale)."""

    log_std: float
    n_valid: int


@dataclass(frozen=True)
class BootstrapEnsemble:
    """Replicate curves plus pointwise median and percentile band."""

    estimator: str
    im_grid: np.ndarray
    curves: tuple                     # FragilityCurve | None per replicate
    median: FragilityCurve
    lower: FragilityCurve
    upper: FragilityCurve
    median_im_samples: np.ndarray     # g; NaN when a replicate has no median
    valid_counts: np.ndarray          # defined replicates per grid point
    level: float
    n_failed: int


def resample(records, stream: RandomStream | np.random.Generator):
    """Draw len(records) records with replacement."""
    if len(records) == 0:
        raise DataError("cannot resample an empty record set")
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    idx = rng.integers(0, len(records), size=len(records))
    return [records[i] for i in idx]


def _pointwise(values, q: float) -> tuple[np.ndarray, np.ndarray]:
    """Lower-order-statistic percentile per grid point, NaN-aware."""
    out = np.full(values.shape[1], np.nan)
    counts = np.zeros(values.shape[1], dtype=int)
    for j in range(values.shape[1]):
        col = values[:, j]
        col = col[np.isfinite(col)]
        counts[j] = col.size
        if col.size:
            out[j] = np.percentile(col, q, method="lower")
    return out, counts


def bootstrap_curves(records, estimator, M: int,
                     base_stream: RandomStream, level: float = 0.95,
                     name: str = "estimator") -> BootstrapEnsemble:
    """Run an estimator on M resamples and summarize pointwise.

    estimator maps a record list to a FragilityCurve on a fixed grid.
    Replicates raising a package error are recorded as failed; more than
    20% failures aborts the ensemble.
    """
    if M < 2:
        raise DataError("need at least 2 bootstrap replicates")
    if not 0.0 < level < 1.0:
        raise DataError("confidence level must lie in (0, 1)")
    curves = []
    grid = None
    for m in range(M):
        sample = resample(records, base_stream.child(m))
        try:
            curve = estimator(sample)
        except SeisfragError:
            curves.append(None)
            continue
        if grid is None:
            grid = curve.im_grid
        elif curve.im_grid.shape != grid.shape or not np.array_equal(curve.im_grid, grid):
            raise DataError("estimator changed its grid between replicates")
        curves.append(curve)
    n_failed = sum(c is None for c in curves)
    if n_failed > 0.2 * M:
        raise EnsembleError(f"{n_failed}/{M} bootstrap replicates failed")
    ok = [c for c in curves if c is not None]
    values = np.vstack([c.probabilities for c in ok])
    q_lo = 100.0 * (1.0 - level) / 2.0
    med_p, counts = _pointwise(values, 50.0)
    lo_p, _ = _pointwise(values, q_lo)
    hi_p, _ = _pointwise(values, 100.0 - q_lo)
    proto = ok[0]

    def as_curve(p, tag):
        return FragilityCurve(im_grid=grid, probabilities=p,
                              method=f"{proto.method}-boot-{tag}",
                              im_kind=proto.im_kind, threshold=proto.threshold)

    med_im = np.array([math.nan if c is None else _median_im_or_nan(c)
                       for c in curves])
    return BootstrapEnsemble(
        estimator=name, im_grid=grid, curves=tuple(curves),
        median=as_curve(med_p, "median"), lower=as_curve(lo_p, "lower"),
        upper=as_curve(hi_p, "upper"), median_im_samples=med_im,
        valid_counts=counts, level=level, n_failed=n_failed)


def median_im(curve: FragilityCurve) -> float | None:
    """IM at the first upward crossing of probability 0.5.

    Interpolates linearly in (ln IM, probability) over the defined grid
    points; None when the curve never reaches 0.5.
    """
    mask = curve.defined()
    if np.count_nonzero(mask) < 2:
        return None
    im = curve.im_grid[mask]
    p = curve.probabilities[mask]
    if p[0] >= 0.5:
        return float(im[0])
    for i in range(1, p.size):
        if p[i - 1] < 0.5 <= p[i]:
            x0, x1 = math.log(im[i - 1]), math.log(im[i])
            frac = (0.5 - p[i - 1]) / (p[i] - p[i - 1])
            return math.exp(x0 + frac * (x1 - x0))
    return None


def _median_im_or_nan(curve) -> float:
    value = median_im(curve)
    return math.nan if value is None else value


def median_im_logstd(ensemble: BootstrapEnsemble) -> MedianIMStats:
    """Sample std of ln(median IM) over valid bootstrap replicates."""
    samples = ensemble.median_im_samples
    valid = samples[np.isfinite(samples)]
    if valid.size < 10:
        raise DataError(
            f"only {valid.size} valid median-IM samples; need at least 10")
    return MedianIMStats(log_std=float(np.std(np.log(valid), ddof=1)),
                         n_valid=int(valid.size))
