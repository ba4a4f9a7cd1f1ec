"""Stochastic ground-motion model: parameter sampling and synthesis.

A motion is a modulated filtered white noise.  Six parameters drive one
realization: Arias intensity, effective duration D5-95, strong-shaking
midpoint t_mid, filter frequency at t_mid, frequency slope, and filter
bandwidth ratio.  Accelerations are in g throughout, so the gravitational
constant in the Arias integral equals one.

The amplitude coefficient of the Gamma-like modulating function is stored
in log space: for strongly peaked shapes (large alpha2) the linear
coefficient under- or overflows double precision even though the function
itself is perfectly tame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, root
from scipy.special import (betaincinv, gammainc, gammaincinv, gammaln,
                           ndtr, ndtri)

from ._kernels import synth_core
from .errors import ConfigurationError, InfeasibleDescriptorError, MomentMatchError, NumericalError
from .motion import Accelerogram
from .streams import RandomStream

OMEGA_FLOOR = 0.5  # rad/s; keeps the filter defined when the linear law dips

# achievable (x95 - x05)/x45 ratio of the squared-modulator energy law;
# the upper end corresponds to the alpha2 >= 1 construction guard
_K_MIN = 1.0
_K_MAX = 1e8


# ---------------------------------------------------------------------------
# marginal distributions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarginalSpec:
    """One parameter's marginal: family, support, and target moments."""

    family: str                    # lognormal | beta | gamma | two_sided_exponential
    mean: float
    std: float
    support: tuple[float, float] = (0.0, math.inf)
    name: str = ""

    def __post_init__(self):
        if self.std <= 0 or not math.isfinite(self.std):
            raise MomentMatchError(f"{self.name or self.family}: std must be positive")
        object.__setattr__(self, "_shape", _fit_marginal(self))

    def ppf(self, p):
        """Quantile function; p may be an array."""
        return _MARGINAL_PPF[self.family](self, np.asarray(p, dtype=float))


def _fit_marginal(spec: MarginalSpec):
    try:
        return _MARGINAL_FIT[spec.family](spec)
    except KeyError:
        raise MomentMatchError(f"unknown marginal family {spec.family!r}")


def _fit_lognormal(spec):
    if spec.mean <= 0:
        raise MomentMatchError(f"{spec.name}: lognormal mean must be positive")
    sig2 = math.log1p((spec.std / spec.mean) ** 2)
    return (math.log(spec.mean) - 0.5 * sig2, math.sqrt(sig2))


def _ppf_lognormal(spec, p):
    mu, sig = spec._shape
    return np.exp(mu + sig * ndtri(p))


def _fit_beta(spec):
    lo, hi = spec.support
    width = hi - lo
    m = (spec.mean - lo) / width
    s = spec.std / width
    if not 0 < m < 1 or s * s >= m * (1 - m):
        raise MomentMatchError(
            f"{spec.name}: no Beta on [{lo}, {hi}] has mean {spec.mean}, std {spec.std}")
    nu = m * (1 - m) / (s * s) - 1.0
    return (m * nu, (1 - m) * nu)


def _ppf_beta(spec, p):
    a, b = spec._shape
    lo, hi = spec.support
    return lo + (hi - lo) * betaincinv(a, b, p)


def _fit_gamma(spec):
    if spec.mean <= 0:
        raise MomentMatchError(f"{spec.name}: gamma mean must be positive")
    shape = (spec.mean / spec.std) ** 2
    scale = spec.std ** 2 / spec.mean
    return (shape, scale)


def _ppf_gamma(spec, p):
    shape, scale = spec._shape
    return scale * gammaincinv(shape, p)


def _tse_moments(u, v, lo, hi):
    """Mean/std of exp(x/u) on [lo, 0] joined to exp(-x/v) on [0, hi]."""
    el = math.exp(lo / u)
    er = math.exp(-hi / v)
    m0 = u * (1 - el) + v * (1 - er)
    m1 = (-u * u - el * (u * lo - u * u)) + (v * v - er * (v * hi + v * v))
    m2 = (2 * u ** 3 - el * (u * lo * lo - 2 * u * u * lo + 2 * u ** 3)) \
        + (2 * v ** 3 - er * (v * hi * hi + 2 * v * v * hi + 2 * v ** 3))
    mean = m1 / m0
    var = m2 / m0 - mean * mean
    return mean, math.sqrt(var)


def _fit_two_sided_exponential(spec):
    """Asymmetric Laplace with mode at zero, truncated to the support.

    Two decay scales (left u, right v) are solved numerically so the
    truncated distribution matches the target mean and std.
    """
    lo, hi = spec.support
    if not lo < 0 < hi:
        raise MomentMatchError(f"{spec.name}: support must straddle zero")
    if not lo < spec.mean < hi:
        raise MomentMatchError(f"{spec.name}: mean outside support")
    # untruncated closed-form start: v - u = mean, u^2 + v^2 = var
    var = spec.std ** 2
    disc = 2 * var - spec.mean ** 2
    if disc > 0:
        v0 = 0.5 * (spec.mean + math.sqrt(disc))
        u0 = v0 - spec.mean
        if v0 <= 0 or u0 <= 0:
            u0 = v0 = spec.std / math.sqrt(2.0)
    else:
        u0 = v0 = spec.std / math.sqrt(2.0)

    def resid(logs):
        m, s = _tse_moments(math.exp(logs[0]), math.exp(logs[1]), lo, hi)
        return [m - spec.mean, s - spec.std]

    sol = root(resid, [math.log(u0), math.log(v0)], tol=1e-13)
    if not sol.success:
        raise MomentMatchError(
            f"{spec.name}: two-sided exponential moment match failed on [{lo}, {hi}]")
    return (math.exp(sol.x[0]), math.exp(sol.x[1]))


def _ppf_two_sided_exponential(spec, p):
    u, v = spec._shape
    lo, hi = spec.support
    mass_l = u * (1 - math.exp(lo / u))
    mass_r = v * (1 - math.exp(-hi / v))
    total = mass_l + mass_r
    t = p * total
    left = t < mass_l
    out = np.empty_like(t)
    out[left] = u * np.log(t[left] / u + math.exp(lo / u))
    out[~left] = -v * np.log1p(-(t[~left] - mass_l) / v)
    return out


_MARGINAL_FIT = {
    "lognormal": _fit_lognormal,
    "beta": _fit_beta,
    "gamma": _fit_gamma,
    "two_sided_exponential": _fit_two_sided_exponential,
}

_MARGINAL_PPF = {
    "lognormal": _ppf_lognormal,
    "beta": _ppf_beta,
    "gamma": _ppf_gamma,
    "two_sided_exponential": _ppf_two_sided_exponential,
}


@dataclass(frozen=True)
class GMParamDistributions:
    """Marginals of the six motion parameters, optionally rank-correlated.

    Frequency-like marginals are specified in Hz and converted to rad/s
    when a parameter set is drawn.
    """

    arias_intensity: MarginalSpec
    effective_duration: MarginalSpec
    t_mid: MarginalSpec
    freq_mid_hz: MarginalSpec
    freq_slope_hz: MarginalSpec
    bandwidth_zeta: MarginalSpec
    correlation: np.ndarray | None = None

    def __post_init__(self):
        if self.correlation is not None:
            r = np.asarray(self.correlation, dtype=float)
            if r.shape != (6, 6):
                raise ConfigurationError("correlation matrix must be 6x6")
            if not np.allclose(r, r.T) or not np.allclose(np.diag(r), 1.0):
                raise ConfigurationError(
                    "correlation matrix must be symmetric with unit diagonal")
            if np.min(np.linalg.eigvalsh(r)) < -1e-10:
                raise ConfigurationError("correlation matrix must be PSD")
            object.__setattr__(self, "correlation", r)

    def marginals(self):
        return (self.arias_intensity, self.effective_duration, self.t_mid,
                self.freq_mid_hz, self.freq_slope_hz, self.bandwidth_zeta)


def default_gm_distributions() -> GMParamDistributions:
    """Published strong-motion statistics for the six model parameters."""
    return GMParamDistributions(
        arias_intensity=MarginalSpec("lognormal", 0.0468, 0.164,
                                     (0.0, math.inf), "arias_intensity"),
        effective_duration=MarginalSpec("beta", 17.3, 9.31, (5.0, 45.0),
                                        "effective_duration"),
        t_mid=MarginalSpec("beta", 12.4, 7.44, (0.5, 40.0), "t_mid"),
        freq_mid_hz=MarginalSpec("gamma", 5.87, 3.11, (0.0, math.inf),
                                 "freq_mid_hz"),
        freq_slope_hz=MarginalSpec("two_sided_exponential", -0.089, 0.185,
                                   (-2.0, 0.5), "freq_slope_hz"),
        bandwidth_zeta=MarginalSpec("beta", 0.213, 0.143, (0.02, 1.0),
                                    "bandwidth_zeta"),
    )


@dataclass(frozen=True)
class GroundMotionParams:
    """The six stochastic parameters of one synthetic motion."""

    arias_intensity: float      # s*g
    effective_duration: float   # s, 5%-95% Arias window
    t_mid: float                # s, 45% Arias instant
    omega_mid: float            # rad/s at t_mid
    omega_slope: float          # rad/s^2
    bandwidth_zeta: float       # filter damping-like ratio

    def __post_init__(self):
        if self.arias_intensity <= 0:
            raise ConfigurationError("arias_intensity must be positive")
        if not 5.0 <= self.effective_duration <= 45.0:
            raise ConfigurationError("effective_duration outside [5, 45] s")
        if not 0.5 <= self.t_mid <= 40.0:
            raise ConfigurationError("t_mid outside [0.5, 40] s")
        if self.omega_mid <= 0:
            raise ConfigurationError("omega_mid must be positive")
        if not 0.02 <= self.bandwidth_zeta < 1.0:
            raise ConfigurationError("bandwidth_zeta outside [0.02, 1)")


def _copula_transform(dists, z):
    if dists.correlation is not None:
        # PSD factor; eigh handles semidefinite matrices Cholesky rejects
        w, v = np.linalg.eigh(dists.correlation)
        z = z @ (v * np.sqrt(np.maximum(w, 0.0))).T
    return ndtr(z)


def sample_gm_params(dists: GMParamDistributions,
                     stream: RandomStream | np.random.Generator) -> GroundMotionParams:
    """Draw one parameter set by inverse transform.

    Marginals are independent unless a correlation matrix is supplied, in
    which case a Gaussian copula couples them.
    """
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    p = _copula_transform(dists, rng.standard_normal(6))
    draws = [spec.ppf(pi).item() for spec, pi in zip(dists.marginals(), p)]
    return GroundMotionParams(
        arias_intensity=draws[0],
        effective_duration=draws[1],
        t_mid=draws[2],
        omega_mid=2.0 * math.pi * draws[3],
        omega_slope=2.0 * math.pi * draws[4],
        bandwidth_zeta=draws[5],
    )


def sample_gm_params_batch(dists: GMParamDistributions,
                           stream: RandomStream | np.random.Generator,
                           n: int) -> np.ndarray:
    """Draw n parameter sets at once; returns an (n, 6) array.

    Columns follow the marginal order (Arias, D5-95, t_mid, freq_mid Hz,
    freq_slope Hz, zeta_f); row 0 equals the single-draw result for the
    same stream.
    """
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    p = _copula_transform(dists, rng.standard_normal((n, 6)))
    return np.column_stack([spec.ppf(p[:, j])
                            for j, spec in enumerate(dists.marginals())])


# ---------------------------------------------------------------------------
# modulating function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulatorCoeffs:
    """Gamma-like amplitude modulator a1 * t^(a2-1) * exp(-a3 t).

    log_alpha1 is the stored amplitude; alpha2 >= 1 is required so the
    function vanishes (or is finite) at t = 0 and the squared-modulator
    energy integral is finite.  total_duration covers 99% of the
    cumulative energy plus a quiet tail.
    """

    alpha2: float
    alpha3: float
    total_duration: float
    log_alpha1: float

    def __post_init__(self):
        if self.alpha2 < 1.0:
            raise ConfigurationError("alpha2 < 1 is rejected (q unbounded at t=0)")
        if self.alpha3 <= 0:
            raise ConfigurationError("alpha3 must be positive")
        if self.total_duration <= 0:
            raise ConfigurationError("total_duration must be positive")
        # -inf is the q = 0 edge input (alpha1 = 0 exactly)
        if math.isnan(self.log_alpha1) or self.log_alpha1 == math.inf:
            raise ConfigurationError("amplitude coefficient must be finite")

    @property
    def alpha1(self) -> float:
        return math.exp(self.log_alpha1)

    @classmethod
    def from_alpha1(cls, alpha1, alpha2, alpha3, total_duration):
        if alpha1 <= 0:
            raise ConfigurationError("alpha1 must be positive")
        return cls(alpha2, alpha3, total_duration, math.log(alpha1))


def modulating_q(t, coeffs: ModulatorCoeffs):
    """Evaluate the modulator at time(s) t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("modulator is defined for t >= 0")
    out = np.zeros(t.shape)
    pos = t > 0
    out[pos] = np.exp(coeffs.log_alpha1
                      + (coeffs.alpha2 - 1.0) * np.log(t[pos])
                      - coeffs.alpha3 * t[pos])
    if coeffs.alpha2 == 1.0:
        out[~pos] = coeffs.alpha1
    return out if out.shape else float(out)


def _percentile_spread_ratio(k: float) -> float:
    x05 = gammaincinv(k, 0.05)
    x45 = gammaincinv(k, 0.45)
    x95 = gammaincinv(k, 0.95)
    return (x95 - x05) / x45


def solve_modulator(ia: float, d595: float, tmid: float) -> ModulatorCoeffs:
    """Invert (Arias, D5-95, t_mid) into modulator coefficients.

    With k = 2*alpha2 - 1 and theta = 2*alpha3 the normalized cumulative
    energy of q^2 is the regularized lower incomplete gamma P(k, theta*t),
    so the spread ratio (x95 - x05)/x45 of its percentiles depends on k
    alone; a 1-D root solve on k followed by closed-form back-substitution
    pins theta, the amplitude, and the total duration t99 + 2 s.
    """
    if ia <= 0 or d595 <= 0 or tmid <= 0:
        raise InfeasibleDescriptorError("descriptors must be positive")
    target = d595 / tmid
    r_hi = _percentile_spread_ratio(_K_MIN)
    r_lo = _percentile_spread_ratio(_K_MAX)
    if not r_lo <= target <= r_hi:
        raise InfeasibleDescriptorError(
            f"D5-95/t_mid = {target:.4g} outside achievable range "
            f"[{r_lo:.4g}, {r_hi:.4g}]")
    try:
        log_k = brentq(
            lambda lk: _percentile_spread_ratio(math.exp(lk)) - target,
            math.log(_K_MIN), math.log(_K_MAX), xtol=1e-14, rtol=1e-15)
    except (ValueError, RuntimeError) as exc:
        raise NumericalError(f"modulator root solve failed: {exc}")
    k = math.exp(log_k)
    resid = _percentile_spread_ratio(k) - target
    if abs(resid) > 1e-9 * target:
        raise NumericalError(
            f"modulator root solve did not converge (residual {resid:.3g})")
    theta = gammaincinv(k, 0.45) / tmid
    # Arias constraint: alpha1^2 * Gamma(k) / theta^k = (2 g / pi) * ia, g = 1
    log_alpha1 = 0.5 * (math.log(2.0 * ia / math.pi)
                        + k * math.log(theta) - gammaln(k))
    t99 = gammaincinv(k, 0.99) / theta
    return ModulatorCoeffs(alpha2=(k + 1.0) / 2.0, alpha3=theta / 2.0,
                           total_duration=t99 + 2.0, log_alpha1=log_alpha1)


def cumulative_energy_fraction(t, coeffs: ModulatorCoeffs):
    """Normalized cumulative energy of q^2 at time t (closed form)."""
    k = 2.0 * coeffs.alpha2 - 1.0
    theta = 2.0 * coeffs.alpha3
    return gammainc(k, theta * np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# filter and synthesis
# ---------------------------------------------------------------------------

def filter_irf(t_lag, omega_f, zeta_f: float):
    """Pseudo-acceleration impulse response of the linear SDOF filter.

    omega_f may be an array broadcast against t_lag (one frequency per
    impulse lag).
    """
    omega_f = np.asarray(omega_f, dtype=float)
    if np.any(omega_f <= 0):
        raise ConfigurationError("omega_f must be positive")
    if not 0.0 < zeta_f < 1.0:
        raise ConfigurationError("zeta_f must lie in (0, 1)")
    t_lag = np.asarray(t_lag, dtype=float)
    sq = math.sqrt(1.0 - zeta_f ** 2)
    lag = np.where(t_lag < 0.0, 0.0, t_lag)   # sin(w sq * 0) = 0 on the mask
    out = np.where(
        t_lag < 0.0, 0.0,
        (omega_f / sq) * np.exp(-zeta_f * omega_f * lag)
        * np.sin(omega_f * sq * lag))
    return out if out.shape else float(out)


def frequency_at(tau, params: GroundMotionParams):
    """Filter frequency law: linear in time, floored at OMEGA_FLOOR."""
    tau = np.asarray(tau, dtype=float)
    w = params.omega_mid + params.omega_slope * (tau - params.t_mid)
    out = np.maximum(w, OMEGA_FLOOR)
    return out if out.shape else float(out)


def frequency_clipped(params: GroundMotionParams, total_duration: float) -> bool:
    """True when the linear frequency law hits the floor within the motion."""
    ends = min(params.omega_mid - params.omega_slope * params.t_mid,
               params.omega_mid + params.omega_slope * (total_duration - params.t_mid))
    return ends < OMEGA_FLOOR


def synthesize(params: GroundMotionParams,
               stream: RandomStream | np.random.Generator,
               dt: float = 0.01, label: str = "") -> Accelerogram:
    """Generate one synthetic accelerogram (units of g).

    Standard normal impulses sit at t_i = i*T/n; the weighted sum is
    normalized to unit variance at every output instant before the
    modulator is applied.  Identical (stream, dt) reproduce the motion
    bit-for-bit.
    """
    if not 0.0 < dt <= 0.02:
        raise ConfigurationError("dt must lie in (0, 0.02] s")
    coeffs = solve_modulator(params.arias_intensity,
                             params.effective_duration, params.t_mid)
    T = coeffs.total_duration
    n = int(math.ceil(T / dt))
    rng = stream.generator() if isinstance(stream, RandomStream) else stream
    u = rng.standard_normal(n)
    t_imp = np.arange(1, n + 1) * (T / n)
    omega_imp = frequency_at(t_imp, params)
    q = modulating_q(np.arange(n) * dt, coeffs)
    samples = synth_core(n, dt, t_imp, omega_imp, params.bandwidth_zeta, q, u)
    return Accelerogram(dt=dt, samples=samples, label=label)
