"""Parametric (lognormal) fragility: maximum likelihood and demand models.

Estimates are canonicalized against record order: inputs are sorted
internally so a permutation of the records reproduces identical sums and
hence identical fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .errors import ConfigurationError, DataError, DegenerateDataError, NumericalError

BETA_FLOOR = 1e-12          # degenerate (step-function) limit
SEPARATION_BETA = 1e-4      # below this the data are (near) separable
MIN_SEGMENT_POINTS = 10


def _im_delta_arrays(records, im_kind):
    im = np.array([r.im.value(im_kind) for r in records], dtype=float)
    delta = np.array([r.delta for r in records], dtype=float)
    order = np.lexsort((delta, im))
    return im[order], delta[order]


@dataclass(frozen=True)
class LognormalCurve:
    """Lognormal CDF fragility with median alpha and log-std beta."""

    alpha: float
    beta: float
    im_kind: str = "pga"
    threshold: float = math.nan
    notes: tuple = ()

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConfigurationError("alpha must be positive")
        if self.beta <= 0:
            raise ConfigurationError("beta must be positive")


def lognormal_eval(curve: LognormalCurve, im):
    """Phi((ln im - ln alpha) / beta)."""
    im = np.asarray(im, dtype=float)
    if np.any(im <= 0):
        raise ValueError("im must be positive")
    out = ndtr((np.log(im) - math.log(curve.alpha)) / curve.beta)
    return out if out.shape else float(out)


@dataclass(frozen=True)
class DemandModelFit:
    """Log-linear demand model ln(delta) = A ln(im) + B + zeta*Z."""

    A: float
    B: float
    zeta_res: float
    r2: float


@dataclass(frozen=True)
class SegmentedFit:
    """Continuous two-segment demand model in (ln im, ln delta)."""

    break_im: float
    segments: tuple[DemandModelFit, DemandModelFit]
    notes: tuple = ()

    def segment_for(self, im: float) -> DemandModelFit:
        return self.segments[0] if im <= self.break_im else self.segments[1]


def fit_linear_demand(records, im_kind: str) -> DemandModelFit:
    """Ordinary least squares of ln(delta) on ln(im)."""
    if len(records) < 3:
        raise DataError("need at least 3 records for the demand model")
    im, delta = _im_delta_arrays(records, im_kind)
    if np.any(im <= 0) or np.any(delta <= 0):
        raise DataError("demand model needs positive IM and drift values")
    x = np.log(im)
    y = np.log(delta)
    return _ols_fit(x, y)


def _ols_fit(x, y) -> DemandModelFit:
    n = x.size
    xm = x.mean()
    ym = y.mean()
    sxx = float(np.sum((x - xm) ** 2))
    if sxx <= 0.0:
        raise DataError("zero variance of ln IM: demand model unidentifiable")
    a = float(np.sum((x - xm) * (y - ym))) / sxx
    b = ym - a * xm
    e = y - (a * x + b)
    sse = float(np.sum(e ** 2))
    sst = float(np.sum((y - ym) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    zeta = math.sqrt(sse / (n - 2)) if n > 2 else 0.0
    return DemandModelFit(A=a, B=b, zeta_res=zeta, r2=r2)


def lr_to_fragility(fit: DemandModelFit, delta_o: float,
                    im_kind: str = "pga") -> LognormalCurve:
    """Closed-form conversion of the demand model into a lognormal curve."""
    if fit.A <= 0:
        raise ConfigurationError(
            "demand slope A <= 0: fragility would not increase with IM")
    if delta_o <= 0:
        raise ConfigurationError("threshold must be positive")
    alpha = math.exp((math.log(delta_o) - fit.B) / fit.A)
    beta = max(fit.zeta_res / fit.A, BETA_FLOOR)
    return LognormalCurve(alpha=alpha, beta=beta, im_kind=im_kind,
                          threshold=delta_o)


def fit_mle(records, delta_o: float, im_kind: str) -> LognormalCurve:
    """Maximum-likelihood lognormal curve from binary exceedance data.

    Bernoulli log-likelihood maximized over (ln alpha, ln beta) by
    Nelder-Mead, started from the linear-regression fit when available.
    """
    if delta_o <= 0:
        raise ConfigurationError("threshold must be positive")
    im, delta = _im_delta_arrays(records, im_kind)
    if np.any(im <= 0):
        raise DataError("MLE fit needs positive IM values")
    y = (delta >= delta_o).astype(float)
    n_fail = int(y.sum())
    if n_fail == 0 or n_fail == y.size:
        raise DegenerateDataError(
            f"all records on one side of threshold {delta_o:g} "
            f"({n_fail}/{y.size} failures)")
    log_im = np.log(im)

    def neg_ll(theta):
        ln_alpha, ln_beta = theta
        p = ndtr((log_im - ln_alpha) / math.exp(ln_beta))
        p = np.clip(p, 1e-12, 1.0 - 1e-12)
        return -float(np.sum(y * np.log(p) + (1.0 - y) * np.log1p(-p)))

    x0 = _mle_start(records, im, y, delta_o, im_kind)
    res = minimize(neg_ll, x0, method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-9, "maxiter": 4000,
                            "maxfev": 4000})
    if not np.all(np.isfinite(res.x)):
        raise NumericalError("MLE optimization diverged")
    alpha = math.exp(res.x[0])
    beta = math.exp(res.x[1])
    notes = ()
    if beta < SEPARATION_BETA:
        beta = max(beta, BETA_FLOOR)
        notes = ("separation: data are (near) perfectly separated, "
                 "beta is at its lower limit",)
    return LognormalCurve(alpha=alpha, beta=beta, im_kind=im_kind,
                          threshold=delta_o, notes=notes)


def _mle_start(records, im, y, delta_o, im_kind):
    try:
        lr = fit_linear_demand(records, im_kind)
        curve = lr_to_fragility(lr, delta_o, im_kind)
        return np.array([math.log(curve.alpha),
                         math.log(max(curve.beta, 0.05))])
    except (DataError, ConfigurationError):
        alpha0 = float(np.median(im[y > 0.5]))
        return np.array([math.log(alpha0), math.log(0.6)])


# ---------------------------------------------------------------------------
# segmented demand model
# ---------------------------------------------------------------------------

def _segmented_sse(x, y, c):
    """SSE of the continuous two-segment OLS with break at c (ln-IM)."""
    hinge = np.maximum(x - c, 0.0)
    design = np.column_stack([np.ones_like(x), x, hinge])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return float(np.sum(resid ** 2)), coef


def _golden_section(f, lo, hi, tol=1e-10):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_segmented(records, im_kind: str) -> SegmentedFit:
    """Continuous bilinear fit in (ln im, ln delta) with an optimized break.

    The break is located by refining a 50-point grid over the 10%-90% IM
    quantile range with golden-section search; candidates leaving fewer
    than 10 points on either side are skipped.
    """
    if len(records) < 20:
        raise DataError("need at least 20 records for the segmented model")
    im, delta = _im_delta_arrays(records, im_kind)
    if np.any(im <= 0) or np.any(delta <= 0):
        raise DataError("segmented model needs positive IM and drift values")
    x = np.log(im)
    y = np.log(delta)

    q10, q90 = np.quantile(im, [0.10, 0.90])
    grid = np.linspace(math.log(q10), math.log(q90), 50)
    valid = [c for c in grid
             if np.sum(x <= c) >= MIN_SEGMENT_POINTS
             and np.sum(x > c) >= MIN_SEGMENT_POINTS]
    linear = _ols_fit(x, y)
    sst = float(np.sum((y - y.mean()) ** 2))
    sse_lin = float(np.sum((y - (linear.A * x + linear.B)) ** 2))
    if not valid:
        notes = ("fallback_linear: no candidate break leaves 10 points per side",)
        return SegmentedFit(break_im=float(np.median(im)),
                            segments=(linear, linear), notes=notes)

    sse_grid = [(c, _segmented_sse(x, y, c)[0]) for c in valid]
    best_idx = int(np.argmin([s for _, s in sse_grid]))
    lo = sse_grid[max(best_idx - 1, 0)][0]
    hi = sse_grid[min(best_idx + 1, len(sse_grid) - 1)][0]
    c_star = sse_grid[best_idx][0]
    if hi > lo:
        refined = _golden_section(lambda c: _segmented_sse(x, y, c)[0], lo, hi)
        if _segmented_sse(x, y, refined)[0] <= sse_grid[best_idx][1]:
            c_star = refined

    sse_seg, coef = _segmented_sse(x, y, c_star)
    b0, b1, b2 = coef
    left = x <= c_star
    seg_fits = []
    for mask, a, b in ((left, b1, b0), (~left, b1 + b2, b0 - b2 * c_star)):
        xs = x[mask]
        ys = y[mask]
        e = ys - (a * xs + b)
        sse_s = float(np.sum(e ** 2))
        sst_s = float(np.sum((ys - ys.mean()) ** 2))
        n_s = xs.size
        zeta_s = math.sqrt(sse_s / (n_s - 2)) if n_s > 2 else 0.0
        r2_s = 1.0 - sse_s / sst_s if sst_s > 0 else 1.0
        seg_fits.append(DemandModelFit(A=float(a), B=float(b),
                                       zeta_res=zeta_s, r2=r2_s))

    notes = ()
    # absolute floor keeps the relative test meaningful for noise-free data
    if sse_lin - sse_seg < 1e-8 * max(sse_lin, 1e-10 * sst):
        notes = ("effectively_linear: segmentation does not improve the fit",)
    return SegmentedFit(break_im=math.exp(c_star),
                        segments=(seg_fits[0], seg_fits[1]), notes=notes)


def segmented_to_fragility(fit: SegmentedFit, delta_o: float, im):
    """Exceedance probability from the segment containing each im."""
    if delta_o <= 0:
        raise ConfigurationError("threshold must be positive")
    im = np.asarray(im, dtype=float)
    if np.any(im <= 0):
        raise ValueError("im must be positive")
    out = np.empty(im.shape if im.shape else (1,))
    flat_im = np.atleast_1d(im)
    for i, a in enumerate(flat_im):
        seg = fit.segment_for(float(a))
        zeta = max(seg.zeta_res, BETA_FLOOR)
        out.flat[i] = ndtr((seg.A * math.log(a) + seg.B - math.log(delta_o))
                           / zeta)
    return out.reshape(im.shape) if im.shape else float(out[0])
