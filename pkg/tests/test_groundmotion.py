import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import brentq

from seisfrag import (GroundMotionParams, MarginalSpec, ModulatorCoeffs,
                      RandomStream, default_gm_distributions, filter_irf,
                      frequency_at, modulating_q, sample_gm_params,
                      sample_gm_params_batch, solve_modulator, synthesize)
from seisfrag._kernels import synth_core
from seisfrag.errors import (ConfigurationError, InfeasibleDescriptorError,
                             MomentMatchError)
from seisfrag.groundmotion import GMParamDistributions

FIXED = GroundMotionParams(arias_intensity=0.05, effective_duration=15.0,
                           t_mid=8.0, omega_mid=2 * math.pi * 5.87,
                           omega_slope=-2 * math.pi * 0.089,
                           bandwidth_zeta=0.213)


# ---------------------------------------------------------------------------
# marginal sampling
# ---------------------------------------------------------------------------

def test_lognormal_arias_sampler_moments():
    dists = default_gm_distributions()
    draws = sample_gm_params_batch(dists, RandomStream(8, 0), 100000)[:, 0]
    assert abs(draws.mean() - 0.0468) <= 0.03 * 0.0468
    assert abs(draws.std(ddof=1) - 0.164) <= 0.05 * 0.164


def test_beta_duration_support():
    dists = default_gm_distributions()
    draws = sample_gm_params_batch(dists, RandomStream(3, 0), 100000)[:, 1]
    assert np.all(draws >= 5.0)
    assert np.all(draws <= 45.0)


def test_beta_moment_inversion_oracle():
    spec = MarginalSpec("beta", 17.3, 9.31, (5.0, 45.0), "d595")
    a, b = spec._shape
    lo, hi = 5.0, 45.0
    width = hi - lo
    mean = lo + width * a / (a + b)
    var = width ** 2 * a * b / ((a + b) ** 2 * (a + b + 1.0))
    assert mean == pytest.approx(17.3, rel=1e-12)
    assert math.sqrt(var) == pytest.approx(9.31, rel=1e-12)


def test_two_sided_exponential_moments_and_support():
    spec = MarginalSpec("two_sided_exponential", -0.089, 0.185,
                        (-2.0, 0.5), "freq_slope")
    rng = RandomStream(5, 0).generator()
    draws = spec.ppf(rng.random(200000))
    assert np.all(draws >= -2.0)
    assert np.all(draws <= 0.5)
    assert draws.mean() == pytest.approx(-0.089, abs=5e-4)
    assert draws.std(ddof=1) == pytest.approx(0.185, abs=1e-3)


def test_moment_match_failure_names_parameter():
    with pytest.raises(MomentMatchError, match="duration"):
        MarginalSpec("beta", 17.3, 40.0, (5.0, 45.0), "duration")


def test_identity_correlation_matches_independent():
    base = default_gm_distributions()
    corr = GMParamDistributions(
        base.arias_intensity, base.effective_duration, base.t_mid,
        base.freq_mid_hz, base.freq_slope_hz, base.bandwidth_zeta,
        correlation=np.eye(6))
    p_ind = sample_gm_params(base, RandomStream(17, 2))
    p_cop = sample_gm_params(corr, RandomStream(17, 2))
    assert p_ind == p_cop


def test_correlation_matrix_validated():
    base = default_gm_distributions()
    bad = np.eye(6)
    bad[0, 1] = 0.5  # not symmetric
    with pytest.raises(ConfigurationError):
        GMParamDistributions(
            base.arias_intensity, base.effective_duration, base.t_mid,
            base.freq_mid_hz, base.freq_slope_hz, base.bandwidth_zeta,
            correlation=bad)


# ---------------------------------------------------------------------------
# modulator inversion
# ---------------------------------------------------------------------------

def _energy_percentile(coeffs, total, p):
    def c_of(t):
        val, _ = quad(lambda s: modulating_q(s, coeffs) ** 2, 0.0, t, limit=200)
        return val / total - p
    return brentq(c_of, 1e-9, coeffs.total_duration * 3.0, xtol=1e-10)


def test_solve_modulator_quadrature_oracle():
    ia, d595, tmid = 0.05, 15.0, 8.0
    coeffs = solve_modulator(ia, d595, tmid)
    total, _ = quad(lambda t: modulating_q(t, coeffs) ** 2, 0.0, np.inf,
                    limit=400)
    c_tmid, _ = quad(lambda t: modulating_q(t, coeffs) ** 2, 0.0, tmid,
                     limit=400)
    assert c_tmid / total == pytest.approx(0.45, abs=1e-6)
    t05 = _energy_percentile(coeffs, total, 0.05)
    t95 = _energy_percentile(coeffs, total, 0.95)
    assert t95 - t05 == pytest.approx(d595, abs=1e-6)
    # Arias constraint: (pi/2) * integral of q^2 equals ia (g = 1)
    assert math.pi / 2.0 * total == pytest.approx(ia, rel=1e-9)


def test_solve_modulator_time_scaling():
    base = solve_modulator(0.05, 15.0, 8.0)
    scaled = solve_modulator(0.05, 30.0, 16.0)
    assert scaled.alpha2 == pytest.approx(base.alpha2, rel=1e-9)
    assert scaled.alpha3 == pytest.approx(base.alpha3 / 2.0, rel=1e-9)
    total, _ = quad(lambda t: modulating_q(t, scaled) ** 2, 0.0, np.inf,
                    limit=400)
    t05 = _energy_percentile(scaled, total, 0.05)
    t95 = _energy_percentile(scaled, total, 0.95)
    base_total, _ = quad(lambda t: modulating_q(t, base) ** 2, 0.0, np.inf,
                         limit=400)
    b05 = _energy_percentile(base, base_total, 0.05)
    b95 = _energy_percentile(base, base_total, 0.95)
    assert t05 == pytest.approx(2.0 * b05, rel=1e-6)
    assert t95 == pytest.approx(2.0 * b95, rel=1e-6)


def test_solve_modulator_arias_scaling():
    base = solve_modulator(0.05, 15.0, 8.0)
    scaled = solve_modulator(0.20, 15.0, 8.0)
    assert scaled.alpha2 == pytest.approx(base.alpha2, rel=1e-12)
    assert scaled.alpha3 == pytest.approx(base.alpha3, rel=1e-12)
    assert scaled.alpha1 == pytest.approx(2.0 * base.alpha1, rel=1e-9)


def test_solve_modulator_infeasible_ratio():
    # spread ratio far above the alpha2 >= 1 limit
    with pytest.raises(InfeasibleDescriptorError):
        solve_modulator(0.05, 45.0, 0.5)


# ---------------------------------------------------------------------------
# modulating function
# ---------------------------------------------------------------------------

def test_q_zero_at_origin_for_alpha2_above_one():
    coeffs = ModulatorCoeffs.from_alpha1(2.0, 2.0, 0.5, 30.0)
    assert modulating_q(0.0, coeffs) == 0.0


def test_q_exponential_case():
    coeffs = ModulatorCoeffs.from_alpha1(1.0, 1.0, 1.0, 30.0)
    assert modulating_q(0.0, coeffs) == pytest.approx(1.0)
    t = np.linspace(0.0, 5.0, 40)
    assert np.allclose(modulating_q(t, coeffs), np.exp(-t), rtol=1e-12)


def test_q_argmax_matches_grid_search():
    coeffs = ModulatorCoeffs.from_alpha1(3.0, 2.7, 0.4, 60.0)
    t = np.linspace(0.0, 60.0, 2_000_001)
    grid_argmax = t[np.argmax(modulating_q(t, coeffs))]
    assert grid_argmax == pytest.approx((2.7 - 1.0) / 0.4, abs=1e-4)


def test_q_zero_amplitude_edge():
    coeffs = ModulatorCoeffs(alpha2=2.0, alpha3=0.5, total_duration=30.0,
                             log_alpha1=-math.inf)
    t = np.linspace(0.0, 30.0, 50)
    assert np.all(modulating_q(t, coeffs) == 0.0)


def test_alpha2_below_one_rejected():
    with pytest.raises(ConfigurationError):
        ModulatorCoeffs.from_alpha1(1.0, 0.8, 1.0, 30.0)


# ---------------------------------------------------------------------------
# filter
# ---------------------------------------------------------------------------

def test_filter_causality_and_origin():
    assert filter_irf(-0.1, 2 * math.pi, 0.2) == 0.0
    assert filter_irf(0.0, 2 * math.pi, 0.2) == 0.0


def test_filter_energy_integral_quadrature():
    omega, zeta = 2 * math.pi, 0.2
    total, _ = quad(lambda t: filter_irf(t, omega, zeta) ** 2, 0.0, np.inf,
                    limit=400)
    # analytic SDOF energy integral: omega / (4 zeta)
    assert total == pytest.approx(omega / (4.0 * zeta), rel=1e-8)


def test_filter_invalid_damping():
    with pytest.raises(ConfigurationError):
        filter_irf(0.5, 2 * math.pi, 1.0)


def test_frequency_law():
    assert frequency_at(FIXED.t_mid, FIXED) == pytest.approx(FIXED.omega_mid)
    flat = GroundMotionParams(0.05, 15.0, 8.0, 2 * math.pi * 5.0, 0.0, 0.2)
    tau = np.linspace(0.0, 30.0, 7)
    assert np.allclose(frequency_at(tau, flat), 2 * math.pi * 5.0)
    p = GroundMotionParams(0.05, 15.0, 8.0, 2 * math.pi * 5.0,
                           -2 * math.pi * 0.1, 0.2)
    assert frequency_at(8.0 + 10.0, p) == pytest.approx(2 * math.pi * 4.0)


def test_frequency_floor():
    p = GroundMotionParams(0.05, 15.0, 8.0, 2 * math.pi * 0.2,
                           -2 * math.pi * 0.5, 0.2)
    assert frequency_at(40.0, p) == 0.5


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------

def test_synthesize_deterministic():
    a = synthesize(FIXED, RandomStream(2, 5), dt=0.01)
    b = synthesize(FIXED, RandomStream(2, 5), dt=0.01)
    assert np.array_equal(a.samples, b.samples)
    assert a.dt == b.dt


def test_synthesize_length():
    acc = synthesize(FIXED, RandomStream(2, 0), dt=0.01)
    coeffs = solve_modulator(0.05, 15.0, 8.0)
    assert acc.n == math.ceil(coeffs.total_duration / 0.01)


def test_synthesize_dt_guard():
    with pytest.raises(ConfigurationError):
        synthesize(FIXED, RandomStream(2, 0), dt=0.05)


def _synthesis_inputs(params, dt=0.01):
    coeffs = solve_modulator(params.arias_intensity,
                             params.effective_duration, params.t_mid)
    T = coeffs.total_duration
    n = int(math.ceil(T / dt))
    t_imp = np.arange(1, n + 1) * (T / n)
    omega = frequency_at(t_imp, params)
    q = modulating_q(np.arange(n) * dt, coeffs)
    return coeffs, n, t_imp, omega, q


def test_synthesize_matches_direct_weight_formula():
    """Kernel recurrence agrees with direct evaluation of the weighted sum."""
    dt = 0.01
    coeffs, n, t_imp, omega, q = _synthesis_inputs(FIXED, dt)
    u = RandomStream(4, 0).generator().standard_normal(n)
    out = synth_core(n, dt, t_imp, omega, FIXED.bandwidth_zeta, q, u)
    for k in (50, 400, 900, 1700, n - 1):
        t = k * dt
        h = filter_irf(t - t_imp, omega, FIXED.bandwidth_zeta)
        den = np.sum(h * h)
        expect = q[k] * np.sum(h * u) / math.sqrt(den) if den > 0 else 0.0
        assert out[k] == pytest.approx(expect, rel=1e-9, abs=1e-12)


def test_weight_normalization_sums_to_one():
    dt = 0.01
    coeffs, n, t_imp, omega, q = _synthesis_inputs(FIXED, dt)
    for k in range(40, n, 250):
        t = k * dt
        h = filter_irf(t - t_imp, omega, FIXED.bandwidth_zeta)
        den = np.sum(h * h)
        s = h / math.sqrt(den)
        assert abs(np.sum(s * s) - 1.0) < 1e-12


def test_causality_of_output():
    dt = 0.01
    coeffs, n, t_imp, omega, q = _synthesis_inputs(FIXED, dt)
    rng = RandomStream(6, 0).generator()
    u = rng.standard_normal(n)
    out1 = synth_core(n, dt, t_imp, omega, FIXED.bandwidth_zeta, q, u)
    k0 = n // 2
    u2 = u.copy()
    u2[k0:] += rng.standard_normal(n - k0)  # perturb future impulses only
    out2 = synth_core(n, dt, t_imp, omega, FIXED.bandwidth_zeta, q, u2)
    # t_imp[i] < t_k needs i + 1 < k on the shared spacing; outputs up to
    # k0 depend only on impulses before k0
    assert np.array_equal(out1[:k0 + 1], out2[:k0 + 1])


def test_zero_modulator_gives_zero_motion():
    dt = 0.01
    coeffs, n, t_imp, omega, _ = _synthesis_inputs(FIXED, dt)
    u = RandomStream(7, 0).generator().standard_normal(n)
    out = synth_core(n, dt, t_imp, omega, FIXED.bandwidth_zeta, np.zeros(n), u)
    assert np.all(out == 0.0)


def test_pre_modulation_unit_variance():
    """Variance of the normalized impulse sum is 1 at any fixed instant."""
    dt = 0.01
    coeffs, n, t_imp, omega, _ = _synthesis_inputs(FIXED, dt)
    ones = np.ones(n)
    k_probe = int(8.0 / dt)
    vals = np.empty(1000)
    for r in range(1000):
        u = RandomStream(31, r).generator().standard_normal(n)
        vals[r] = synth_core(n, dt, t_imp, omega, FIXED.bandwidth_zeta,
                             ones, u)[k_probe]
    assert abs(vals.var(ddof=1) - 1.0) <= 0.1
