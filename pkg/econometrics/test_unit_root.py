"""
Tests for the ADF, PP and break unit-root tests.
"""

import numpy as np
import pytest
import statsmodels.api as sm

from econometrics.errors import SingularRegression, TooShort
from econometrics.unit_root import (
    adf_test,
    break_critical_values,
    newey_west_bandwidth,
    perron_break_test,
    pp_test,
)
from models.schema import Criterion, Deterministic, Series, UnitRootTest


def _ar1(phi: float, n: int, seed: int, shift: float = 0.0, at: int = -1) -> np.ndarray:
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.zeros(n)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    if at >= 0:
        x[at:] += shift
    return x


def test_adf_random_walk_rarely_rejects():
    rejections = 0
    for seed in range(200):
        walk = np.cumsum(np.random.default_rng(seed).standard_normal(500))
        res = adf_test(Series.from_array("rw", walk), Deterministic.CONSTANT, 8, Criterion.BIC)
        rejections += (0.05 in res.reject_at)
    assert rejections <= 20


def test_adf_stationary_ar_rejects():
    rejections = 0
    for seed in range(100):
        res = adf_test(Series.from_array("ar", _ar1(0.5, 500, seed)), Deterministic.CONSTANT, 8)
        rejections += (0.01 in res.reject_at)
    assert rejections >= 99


def test_adf_affine_invariance():
    x = _ar1(0.8, 300, 11)
    base = adf_test(Series.from_array("x", x), Deterministic.CONSTANT_TREND, 8, Criterion.AIC)
    moved = adf_test(
        Series.from_array("x", 3.0 + 2.5 * x), Deterministic.CONSTANT_TREND, 8, Criterion.AIC
    )
    assert moved.lag_or_bandwidth == base.lag_or_bandwidth
    assert moved.statistic == pytest.approx(base.statistic, rel=1e-8)
    assert base.test == UnitRootTest.ADF
    assert set(base.critical_values) == {0.01, 0.05, 0.10}


def test_adf_errors():
    with pytest.raises(TooShort):
        adf_test(Series.from_array("x", np.arange(10.0)), max_lag=8)
    with pytest.raises(SingularRegression):
        adf_test(Series.from_array("x", np.ones(100)), max_lag=2)


def test_pp_uses_automatic_bandwidth():
    x = _ar1(0.5, 442, 5)
    res = pp_test(Series.from_array("x", x), Deterministic.CONSTANT)
    assert res.lag_or_bandwidth == newey_west_bandwidth(442) == 5
    assert (0.01 in res.reject_at)
    fixed = pp_test(Series.from_array("x", x), Deterministic.CONSTANT, bandwidth=3)
    assert fixed.lag_or_bandwidth == 3


def test_break_critical_values_interpolate():
    small = break_critical_values(100)
    assert small[0.05] == pytest.approx(-5.59)
    assert break_critical_values(60) == small
    # 1/T weighting: T = 200 sits halfway between the T = 100 row and the asymptotic row.
    half = break_critical_values(200)
    assert half[0.01] == pytest.approx((-6.32 - 5.57) / 2.0)
    assert half[0.10] == pytest.approx((-5.29 - 4.82) / 2.0)
    large = break_critical_values(5000)
    assert small[0.01] < half[0.01] < large[0.01] < -5.57
    assert large[0.01] == pytest.approx(-5.57, abs=0.02)
    assert break_critical_values(10**9)[0.05] == pytest.approx(-5.08, abs=1e-6)


def test_break_test_reports_date_inside_trimmed_range():
    x = _ar1(0.5, 200, 3, shift=8.0, at=120)
    s = Series.from_array("x", x, start="1990-01")
    res = perron_break_test(s, max_lag=4)
    assert res.break_date is not None
    position = s.timestamps.get_loc(res.break_date)
    assert 30 <= position <= 170
    assert res.p_value is None
    assert res.deterministic == Deterministic.CONSTANT_TREND


@pytest.mark.slow
def test_break_test_recovers_level_shift():
    hits = 0
    n, at = 300, 150
    for seed in range(20):
        x = _ar1(0.5, n, seed, shift=10.0, at=at)
        s = Series.from_array("x", x, start="1980-01")
        res = perron_break_test(s, max_lag=4)
        position = s.timestamps.get_loc(res.break_date)
        hits += abs(position - (at - 1)) <= 6
    assert hits >= 16


def test_adf_without_lags_matches_direct_regression():
    x = _ar1(0.9, 250, 21)
    res = adf_test(Series.from_array("x", x), Deterministic.CONSTANT, max_lag=0)
    X = sm.add_constant(x[:-1])
    direct = sm.OLS(np.diff(x), X).fit()
    assert res.lag_or_bandwidth == 0
    assert res.statistic == pytest.approx(direct.tvalues[1], rel=1e-8)


def test_reject_levels_are_nested():
    x = _ar1(0.95, 300, 8)
    for res in (
        adf_test(Series.from_array("x", x), Deterministic.CONSTANT, 8),
        pp_test(Series.from_array("x", x), Deterministic.CONSTANT_TREND),
    ):
        if 0.01 in res.reject_at:
            assert 0.05 in res.reject_at
        if 0.05 in res.reject_at:
            assert 0.10 in res.reject_at
        assert res.break_date is None


def test_pp_white_noise_rejects_strongly():
    rejections = 0
    for seed in range(20):
        noise = np.random.default_rng(seed).standard_normal(300)
        res = pp_test(Series.from_array("wn", noise), Deterministic.CONSTANT)
        rejections += 0.01 in res.reject_at
        assert res.statistic < -5.0
    assert rejections == 20


def test_pp_and_break_test_minimum_lengths():
    with pytest.raises(TooShort):
        pp_test(Series.from_array("x", _ar1(0.5, 19, 1)))
    with pytest.raises(TooShort):
        perron_break_test(Series.from_array("x", _ar1(0.5, 49, 1)), max_lag=2)
