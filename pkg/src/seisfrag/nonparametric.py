"""Non-parametric fragility: binned Monte Carlo and kernel density estimates.

The KDE estimator works on the joint density of (drift, IM) with a
Gaussian product/matrix kernel; the exceedance integral over drift has a
closed form via Gaussian conditioning, so no quadrature is involved.  By
default both variables are log-transformed first, which is equivalent to
an IM-proportional bandwidth in the original scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr

from .errors import BandwidthError, DataError
from .parametric import fit_linear_demand

DENOMINATOR_FLOOR = 1e-300


@dataclass(frozen=True)
class FragilityCurve:
    """Exceedance probability on an IM grid; NaN marks undefined points."""

    im_grid: np.ndarray
    probabilities: np.ndarray
    method: str
    im_kind: str
    threshold: float
    support: np.ndarray | None = None   # bin counts (binned MC only)
    notes: tuple = ()

    def __post_init__(self):
        grid = np.asarray(self.im_grid, dtype=float)
        probs = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "im_grid", grid)
        object.__setattr__(self, "probabilities", probs)
        if grid.ndim != 1 or probs.shape != grid.shape:
            raise ValueError("grid and probabilities must be 1-D and aligned")
        if np.any(np.diff(grid) <= 0) or np.any(grid <= 0):
            raise ValueError("im grid must be positive and strictly increasing")
        defined = np.isfinite(probs)
        if np.any((probs[defined] < 0) | (probs[defined] > 1)):
            raise ValueError("probabilities must lie in [0, 1]")

    def defined(self) -> np.ndarray:
        return np.isfinite(self.probabilities)


@dataclass(frozen=True)
class BinSpec:
    """Multiplicative bin half-width and minimum usable support."""

    h_rel: float = 0.25
    n_min: int = 30

    def __post_init__(self):
        if not 0.0 < self.h_rel < 1.0:
            raise ValueError("h_rel must lie in (0, 1)")
        if self.n_min < 1:
            raise ValueError("n_min must be at least 1")


@dataclass(frozen=True)
class Bandwidth1D:
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise BandwidthError("bandwidth must be positive")


@dataclass(frozen=True)
class Bandwidth2D:
    matrix: np.ndarray
    notes: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.shape != (2, 2) or not np.allclose(m, m.T):
            raise BandwidthError("bandwidth matrix must be 2x2 symmetric")
        if np.min(np.linalg.eigvalsh(m)) <= 0:
            raise BandwidthError("bandwidth matrix must be positive definite")

    @property
    def det(self) -> float:
        m = self.matrix
        return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def _as_h(h) -> float:
    return h.h if isinstance(h, Bandwidth1D) else Bandwidth1D(float(h)).h


def _as_H(H) -> Bandwidth2D:
    return H if isinstance(H, Bandwidth2D) else Bandwidth2D(np.asarray(H, dtype=float))


def default_im_grid(im_values, n_points: int = 60) -> np.ndarray:
    """Log-spaced grid between the 2nd and 98th percentiles of the data."""
    im_values = np.asarray(im_values, dtype=float)
    if np.any(im_values <= 0):
        raise DataError("IM values must be positive to build a log grid")
    lo, hi = np.quantile(im_values, [0.02, 0.98])
    if not hi > lo:
        raise DataError("degenerate IM range")
    return np.geomspace(lo, hi, n_points)


# ---------------------------------------------------------------------------
# binned Monte Carlo
# ---------------------------------------------------------------------------

def scale_drift(delta_j, im_j, im_o):
    """Linear rescaling of a drift to the bin-center intensity."""
    return delta_j * im_o / im_j


def bmcs_fragility(records, delta_o: float, im_grid, spec: BinSpec,
                   im_kind: str = "pga") -> FragilityCurve:
    """Crude Monte Carlo per bin after local rescaling of the drifts.

    Each grid point IM_o collects the records with IM within a factor
    (1 +/- h_rel); their drifts are scaled linearly to IM_o and the
    exceedance fraction is the count ratio.  Bins with support below
    n_min are reported undefined (NaN), not zero.
    """
    if len(records) == 0:
        raise DataError("no records")
    im = np.array([r.im.value(im_kind) for r in records], dtype=float)
    delta = np.array([r.delta for r in records], dtype=float)
    grid = np.asarray(im_grid, dtype=float)
    probs = np.full(grid.shape, np.nan)
    support = np.zeros(grid.shape, dtype=int)
    for i, im_o in enumerate(grid):
        mask = (im >= (1.0 - spec.h_rel) * im_o) & (im <= (1.0 + spec.h_rel) * im_o)
        n_s = int(np.count_nonzero(mask))
        support[i] = n_s
        if n_s < spec.n_min:
            continue
        scaled = scale_drift(delta[mask], im[mask], im_o)
        probs[i] = float(np.count_nonzero(scaled >= delta_o)) / n_s
    return FragilityCurve(im_grid=grid, probabilities=probs, method="bmcs",
                          im_kind=im_kind, threshold=delta_o, support=support)


# ---------------------------------------------------------------------------
# kernel density estimation
# ---------------------------------------------------------------------------

def kde_1d(samples, h, x):
    """Gaussian kernel density estimate at x."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise DataError("no samples")
    hv = _as_h(h)
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - samples) / hv
    out = np.sum(np.exp(-0.5 * z * z), axis=-1) / (samples.size * hv * math.sqrt(2.0 * math.pi))
    return out if out.shape else float(out)


def kde_2d(samples, H, point):
    """Bivariate Gaussian-kernel density estimate at a point (or points)."""
    samples = np.asarray(samples, dtype=float)
    Hm = _as_H(H)
    inv = np.linalg.inv(Hm.matrix)
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    out = np.empty(pts.shape[0])
    norm = 2.0 * math.pi * samples.shape[0] * math.sqrt(Hm.det)
    for i, p in enumerate(pts):
        v = p - samples
        qform = (v @ inv * v).sum(axis=1)
        out[i] = np.sum(np.exp(-0.5 * qform)) / norm
    return float(out[0]) if np.asarray(point).ndim == 1 else out


def kernel_exceedance_term(sample, a: float, delta_o: float, H) -> float:
    """Closed form of one kernel's drift-exceedance integral at IM = a.

    sample is (delta_i, im_i); the integral of exp(-v' H^-1 v / 2) over
    delta >= delta_o factorizes through Gaussian conditioning into the IM
    marginal weight times a complementary normal CDF.
    """
    Hm = _as_H(H).matrix
    h11, h12, h22 = Hm[0, 0], Hm[0, 1], Hm[1, 1]
    var_c = h11 - h12 * h12 / h22
    if var_c <= 0:
        raise BandwidthError("conditional variance not positive (H not SPD)")
    delta_i, im_i = float(sample[0]), float(sample[1])
    mu_c = delta_i + (h12 / h22) * (a - im_i)
    sig_c = math.sqrt(var_c)
    weight = math.exp(-0.5 * (a - im_i) ** 2 / h22) * math.sqrt(2.0 * math.pi) * sig_c
    return weight * float(ndtr((mu_c - delta_o) / sig_c))


def kde_fragility(records, delta_o: float, im_grid, h_im, H,
                  log_scale: bool = True, im_kind: str = "pga") -> FragilityCurve:
    """Kernel-density fragility curve on an IM grid.

    With log_scale (default) the joint and marginal densities are
    estimated for (ln drift, ln IM) and the exceedance threshold becomes
    ln delta_o; the estimate maps back to the original scale unchanged.
    Grid points whose marginal-density sum underflows are undefined.
    """
    if len(records) == 0:
        raise DataError("no records")
    im = np.array([r.im.value(im_kind) for r in records], dtype=float)
    delta = np.array([r.delta for r in records], dtype=float)
    order = np.lexsort((delta, im))
    im = im[order]
    delta = delta[order]
    grid = np.asarray(im_grid, dtype=float)
    hv = _as_h(h_im)
    Hm = _as_H(H).matrix
    if log_scale:
        if np.any(im <= 0) or np.any(delta <= 0):
            raise DataError("log-scale KDE needs positive IM and drift values")
        u = np.log(im)
        v = np.log(delta)
        a_grid = np.log(grid)
        thr = math.log(delta_o)
    else:
        u = im
        v = delta
        a_grid = grid
        thr = delta_o
    h11, h12, h22 = Hm[0, 0], Hm[0, 1], Hm[1, 1]
    var_c = h11 - h12 * h12 / h22
    if var_c <= 0:
        raise BandwidthError("conditional variance not positive (H not SPD)")
    sig_c = math.sqrt(var_c)
    det = h11 * h22 - h12 * h12

    diff = a_grid[:, None] - u[None, :]                      # (grid, N)
    mu_c = v[None, :] + (h12 / h22) * diff
    num_terms = np.exp(-0.5 * diff * diff / h22) \
        * (math.sqrt(2.0 * math.pi) * sig_c) * ndtr((mu_c - thr) / sig_c)
    den_terms = np.exp(-0.5 * (diff / hv) ** 2)
    num = num_terms.sum(axis=1)
    den = den_terms.sum(axis=1)
    probs = np.full(grid.shape, np.nan)
    ok = den > DENOMINATOR_FLOOR
    probs[ok] = np.clip(hv / math.sqrt(2.0 * math.pi * det) * num[ok] / den[ok],
                        0.0, 1.0)
    return FragilityCurve(im_grid=grid, probabilities=probs, method="kde",
                          im_kind=im_kind, threshold=delta_o)


# ---------------------------------------------------------------------------
# bandwidth selection
# ---------------------------------------------------------------------------

def bandwidth_normal_reference(samples, dim: int = 1):
    """Normal-reference bandwidth: 1.06 sigma N^(-1/5) or N^(-1/3) Sigma."""
    samples = np.asarray(samples, dtype=float)
    if dim == 1:
        if samples.ndim != 1 or samples.size < 2:
            raise DataError("need a 1-D sample of size >= 2")
        sigma = float(np.std(samples, ddof=1))
        if sigma <= 0:
            raise BandwidthError("zero variance sample")
        return Bandwidth1D(1.06 * sigma * samples.size ** (-0.2))
    if dim == 2:
        if samples.ndim != 2 or samples.shape[1] != 2 or samples.shape[0] < 2:
            raise DataError("need an (N, 2) sample with N >= 2")
        cov = np.cov(samples.T)
        if np.min(np.linalg.eigvalsh(cov)) <= 0:
            raise BandwidthError("degenerate sample covariance")
        return Bandwidth2D(samples.shape[0] ** (-1.0 / 3.0) * cov)
    raise ValueError("dim must be 1 or 2")


def _chol_to_matrix(theta):
    l11 = math.exp(theta[0])
    l21 = theta[1]
    l22 = math.exp(theta[2])
    return np.array([[l11 * l11, l11 * l21],
                     [l11 * l21, l21 * l21 + l22 * l22]])


def lscv_objective(samples, Hm, chunk: int = 512) -> float:
    """Closed-form least-squares CV score of a Gaussian-kernel estimate.

    LSCV(H) = int fhat^2 - (2/N) sum_i fhat_{-i}(x_i); for Gaussian
    kernels both terms reduce to pairwise N(0, 2H) and N(0, H) kernel
    sums.  Pairs are processed in row blocks to bound memory.
    """
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    det = Hm[0, 0] * Hm[1, 1] - Hm[0, 1] ** 2
    if det <= 0 or Hm[0, 0] <= 0:
        return math.inf
    try:
        inv = np.linalg.inv(Hm)
    except np.linalg.LinAlgError:
        return math.inf
    s_half = 0.0   # sum over ordered pairs (incl. diagonal) of exp(-q/4)
    s_full = 0.0   # same with exp(-q/2)
    for start in range(0, n, chunk):
        block = samples[start:start + chunk]
        d = block[:, None, :] - samples[None, :, :]
        q = np.einsum("bij,jk,bik->bi", d, inv, d)
        s_half += float(np.exp(-0.25 * q).sum())
        s_full += float(np.exp(-0.5 * q).sum())
    int_f2 = s_half / (n * n * 4.0 * math.pi * math.sqrt(det))
    cross = (s_full - n) / (n * (n - 1) * 2.0 * math.pi * math.sqrt(det))
    return int_f2 - 2.0 * cross


def bandwidth_lscv_2d(samples) -> Bandwidth2D:
    """Least-squares cross-validation bandwidth matrix (Gaussian kernel).

    The closed-form LSCV objective is minimized over the Cholesky factor
    of H by Nelder-Mead, starting from the normal-reference matrix; a
    degenerate optimum falls back to the normal reference (flagged).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[1] != 2:
        raise DataError("need an (N, 2) sample")
    n = samples.shape[0]
    if n < 50:
        raise DataError("need at least 50 samples for LSCV")
    ref = bandwidth_normal_reference(samples, dim=2)
    chol = np.linalg.cholesky(ref.matrix)
    x0 = np.array([math.log(chol[0, 0]), chol[1, 0], math.log(chol[1, 1])])

    def objective(theta):
        return lscv_objective(samples, _chol_to_matrix(theta))

    f0 = objective(x0)
    res = minimize(objective, x0, method="Nelder-Mead",
                   options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 2000})
    fallback = Bandwidth2D(ref.matrix, notes=("lscv_fallback_normal_reference",))
    if not np.all(np.isfinite(res.x)) or not math.isfinite(res.fun) or res.fun > f0:
        return fallback
    try:
        return Bandwidth2D(_chol_to_matrix(res.x))
    except BandwidthError:
        return fallback


# ---------------------------------------------------------------------------
# residual-normality diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalHistogram:
    """Histogram of ln(drift) in one IM bin with the demand-model normal."""

    counts: np.ndarray
    bin_edges: np.ndarray
    mu: float
    sigma: float
    support: int

    def density(self, x):
        """Fitted normal PDF overlay."""
        x = np.asarray(x, dtype=float)
        z = (x - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))


def conditional_histogram(records, im_level: float, spec: BinSpec,
                          n_bins: int, im_kind: str = "pga") -> ConditionalHistogram:
    """Log-drift histogram within a bin plus the fitted demand-model normal.

    Drifts are collected and rescaled exactly as in the binned Monte Carlo
    estimator; the overlay is Normal(A ln(im_level) + B, zeta) from the
    log-linear demand fit on all records.
    """
    im = np.array([r.im.value(im_kind) for r in records], dtype=float)
    delta = np.array([r.delta for r in records], dtype=float)
    mask = (im >= (1.0 - spec.h_rel) * im_level) & (im <= (1.0 + spec.h_rel) * im_level)
    n_s = int(np.count_nonzero(mask))
    if n_s < spec.n_min:
        raise DataError(
            f"bin at {im_level:g} has support {n_s} < n_min {spec.n_min}")
    scaled = scale_drift(delta[mask], im[mask], im_level)
    if np.any(scaled <= 0):
        raise DataError("bin contains non-positive drifts")
    log_drift = np.log(scaled)
    counts, edges = np.histogram(log_drift, bins=n_bins)
    lr = fit_linear_demand(records, im_kind)
    return ConditionalHistogram(counts=counts, bin_edges=edges,
                                mu=lr.A * math.log(im_level) + lr.B,
                                sigma=lr.zeta_res, support=n_s)
