import math

import numpy as np
import pytest

from seisfrag import (BinSpec, FragilityCurve, LognormalCurve, RandomStream,
                      bmcs_fragility, bootstrap_curves, default_im_grid,
                      fit_mle, lognormal_eval, median_im, median_im_logstd,
                      resample)
from seisfrag.errors import DataError, EnsembleError

from conftest import lognormal_demand_records, make_records


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def test_resample_single_record():
    records = make_records([0.5], [0.01])
    out = resample(records, RandomStream(1, 0))
    assert out == records


def test_resample_deterministic():
    records = make_records(np.linspace(0.1, 1.0, 20), np.linspace(0.001, 0.01, 20))
    a = resample(records, RandomStream(3, 4))
    b = resample(records, RandomStream(3, 4))
    assert a == b


def test_resample_expected_multiplicity(rng):
    records = make_records(np.linspace(0.1, 1.0, 50), np.linspace(0.001, 0.01, 50))
    target = records[7]
    total = 0
    reps = 10000
    base = RandomStream(9, 0)
    for m in range(reps):
        total += resample(records, base.child(m)).count(target)
    assert total / reps == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

def _constant_curve_estimator(grid, value):
    def estimator(recs):
        return FragilityCurve(im_grid=grid,
                              probabilities=np.full(grid.shape, value),
                              method="const", im_kind="pga", threshold=0.01)
    return estimator


def test_constant_estimator_zero_width_band():
    grid = np.geomspace(0.1, 1.0, 10)
    records = make_records(np.linspace(0.1, 1.0, 30), np.linspace(0.001, 0.01, 30))
    ens = bootstrap_curves(records, _constant_curve_estimator(grid, 0.4),
                           M=25, base_stream=RandomStream(5, 0))
    assert np.all(ens.median.probabilities == 0.4)
    assert np.all(ens.lower.probabilities == 0.4)
    assert np.all(ens.upper.probabilities == 0.4)
    assert np.all(ens.valid_counts == 25)


def test_two_replicate_median_uses_lower_order_statistic():
    grid = np.geomspace(0.1, 1.0, 5)
    records = make_records(np.linspace(0.1, 1.0, 30), np.linspace(0.001, 0.01, 30))
    values = iter([0.3, 0.7])

    def estimator(recs):
        return FragilityCurve(im_grid=grid,
                              probabilities=np.full(grid.shape, next(values)),
                              method="seq", im_kind="pga", threshold=0.01)

    ens = bootstrap_curves(records, estimator, M=2,
                           base_stream=RandomStream(5, 1))
    assert np.all(ens.median.probabilities == 0.3)


def test_replicate_failures_are_reported():
    grid = np.geomspace(0.1, 1.0, 5)
    records = make_records(np.linspace(0.1, 1.0, 30), np.linspace(0.001, 0.01, 30))
    calls = {"n": 0}

    def flaky(recs):
        calls["n"] += 1
        if calls["n"] in (2, 5):
            raise DataError("synthetic failure")
        return FragilityCurve(im_grid=grid,
                              probabilities=np.full(grid.shape, 0.5),
                              method="flaky", im_kind="pga", threshold=0.01)

    ens = bootstrap_curves(records, flaky, M=20, base_stream=RandomStream(5, 2))
    assert ens.n_failed == 2
    assert ens.curves[1] is None and ens.curves[4] is None
    assert np.all(ens.valid_counts == 18)


def test_too_many_failures_raise():
    records = make_records(np.linspace(0.1, 1.0, 30), np.linspace(0.001, 0.01, 30))

    def broken(recs):
        raise DataError("always fails")

    with pytest.raises(EnsembleError):
        bootstrap_curves(records, broken, M=10, base_stream=RandomStream(5, 3))


def test_replicates_match_standalone_resamples(rng):
    records = lognormal_demand_records(rng, 1500)
    grid = default_im_grid([r.im.pga for r in records], 25)
    spec = BinSpec(0.25, 20)

    def estimator(recs):
        return bmcs_fragility(recs, 0.015, grid, spec)

    base = RandomStream(17, 0)
    ens = bootstrap_curves(records, estimator, M=8, base_stream=base)
    for m in (0, 3, 7):
        direct = estimator(resample(records, base.child(m)))
        assert np.array_equal(ens.curves[m].probabilities, direct.probabilities,
                              equal_nan=True)


def test_mle_coverage_of_original_curve(rng):
    """The original-data curve sits inside the 95% band nearly everywhere."""
    inside_fractions = []
    for rep in range(20):
        rng_r = np.random.default_rng(400 + rep)
        records = lognormal_demand_records(rng_r, 1200, a=1.2, b=-4.0, zeta=0.3)
        grid = default_im_grid([r.im.pga for r in records], 30)

        def estimator(recs):
            curve = fit_mle(recs, 0.015, "pga")
            return FragilityCurve(im_grid=grid,
                                  probabilities=lognormal_eval(curve, grid),
                                  method="mle", im_kind="pga", threshold=0.015)

        original = estimator(records)
        ens = bootstrap_curves(records, estimator, M=60,
                               base_stream=RandomStream(100 + rep, 0))
        inside = (original.probabilities >= ens.lower.probabilities - 1e-12) \
            & (original.probabilities <= ens.upper.probabilities + 1e-12)
        inside_fractions.append(np.mean(inside))
    assert np.mean([f >= 0.9 for f in inside_fractions]) >= 0.9


def test_ci_width_non_increasing_in_sample_size():
    widths = {n: [] for n in (500, 2000, 10000)}
    for rep in range(10):
        for n in widths:
            rng_r = np.random.default_rng(7000 + rep)
            records = lognormal_demand_records(rng_r, n, a=1.2, b=-4.0,
                                               zeta=0.3)
            grid = np.array([0.3, 0.5, 0.8])
            spec = BinSpec(0.25, 10)

            def estimator(recs):
                return bmcs_fragility(recs, 0.015, grid, spec)

            ens = bootstrap_curves(records, estimator, M=40,
                                   base_stream=RandomStream(500 + rep, n))
            width = ens.upper.probabilities - ens.lower.probabilities
            widths[n].append(np.nanmean(width))
    means = [np.mean(widths[n]) for n in (500, 2000, 10000)]
    assert means[0] >= means[1] >= means[2]


# ---------------------------------------------------------------------------
# median IM
# ---------------------------------------------------------------------------

def test_median_im_recovers_lognormal_median():
    curve_params = LognormalCurve(alpha=0.8, beta=0.5)
    grid = np.geomspace(0.1, 5.0, 60)
    curve = FragilityCurve(im_grid=grid,
                           probabilities=lognormal_eval(curve_params, grid),
                           method="lognormal", im_kind="pga", threshold=0.01)
    assert median_im(curve) == pytest.approx(0.8, rel=0.005)


def test_median_im_missing_when_below_half():
    grid = np.geomspace(0.1, 1.0, 20)
    curve = FragilityCurve(im_grid=grid,
                           probabilities=np.full(20, 0.3), method="flat",
                           im_kind="pga", threshold=0.01)
    assert median_im(curve) is None


def test_median_im_first_crossing_of_non_monotone_curve():
    grid = np.geomspace(0.1, 1.0, 9)
    p = np.array([0.1, 0.3, 0.6, 0.7, 0.4, 0.3, 0.6, 0.8, 0.9])
    curve = FragilityCurve(im_grid=grid, probabilities=p, method="wiggly",
                           im_kind="pga", threshold=0.01)
    # brute-force scan for every upward 0.5 crossing
    crossings = []
    for i in range(1, 9):
        if p[i - 1] < 0.5 <= p[i]:
            x0, x1 = math.log(grid[i - 1]), math.log(grid[i])
            frac = (0.5 - p[i - 1]) / (p[i] - p[i - 1])
            crossings.append(math.exp(x0 + frac * (x1 - x0)))
    assert len(crossings) == 2
    assert median_im(curve) == pytest.approx(crossings[0], rel=1e-12)


def test_median_im_logstd_zero_for_identical_medians():
    ens = _ensemble_with_medians(np.full(20, 0.7))
    assert median_im_logstd(ens).log_std == 0.0


def test_median_im_logstd_recovery(rng):
    medians = np.exp(rng.normal(math.log(0.8), 0.1, 10000))
    stats = median_im_logstd(_ensemble_with_medians(medians))
    assert stats.log_std == pytest.approx(0.1, rel=0.05)
    assert stats.n_valid == 10000


def test_median_im_logstd_scale_invariant(rng):
    medians = np.exp(rng.normal(math.log(0.8), 0.2, 500))
    s1 = median_im_logstd(_ensemble_with_medians(medians)).log_std
    s2 = median_im_logstd(_ensemble_with_medians(3.0 * medians)).log_std
    assert s1 == pytest.approx(s2, rel=1e-12)


def test_median_im_logstd_needs_enough_samples():
    with pytest.raises(DataError):
        median_im_logstd(_ensemble_with_medians(np.full(5, 0.7)))


def _ensemble_with_medians(medians):
    from seisfrag.bootstrap import BootstrapEnsemble
    grid = np.geomspace(0.1, 1.0, 5)
    flat = FragilityCurve(im_grid=grid, probabilities=np.full(5, 0.5),
                          method="stub", im_kind="pga", threshold=0.01)
    return BootstrapEnsemble(estimator="stub", im_grid=grid, curves=(),
                             median=flat, lower=flat, upper=flat,
                             median_im_samples=np.asarray(medians, dtype=float),
                             valid_counts=np.full(5, len(medians)),
                             level=0.95, n_failed=0)
