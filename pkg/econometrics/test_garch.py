"""
Tests for the GARCH-family likelihood, simulator and sampler.
"""

import math

import numpy as np
import pytest
from scipy import stats

from econometrics.errors import ChainDivergence, InvalidParams, NumericalUnderflow, TooShort
from econometrics.garch import (
    LOG_DENSITY_FLOOR,
    conditional_volatility,
    fit_garch_bayes,
    garch_filter,
    garch_loglik,
    simulate_garch,
    unconditional_variance,
)
from models.schema import Series
from models.volatility import GarchParams, McmcConfig, VolatilityModelSpec

GARCH = VolatilityModelSpec.from_name("GARCH")
TRUE = GarchParams(mu=0.0, alpha0=0.1, alpha1=0.1, beta1=0.8)


def test_iid_case_matches_closed_form():
    y = np.random.default_rng(0).normal(0.5, 1.4, size=300)
    params = GarchParams(mu=0.5, alpha0=2.0)
    expected = float(np.sum(stats.norm.logpdf(y, loc=0.5, scale=math.sqrt(2.0))))
    assert garch_loglik(GARCH, params, y) == pytest.approx(expected, abs=1e-10)


def test_five_observation_recursion():
    y = [0.5, -1.0, 0.3, 1.2, -0.4]
    mu, a0, a1, b1 = 0.1, 0.2, 0.1, 0.7
    params = GarchParams(mu=mu, alpha0=a0, alpha1=a1, beta1=b1)
    s2 = a0 / (1.0 - a1 - b1)
    total = 0.0
    for t, value in enumerate(y):
        if t > 0:
            prev = y[t - 1] - mu
            s2 = a0 + a1 * prev**2 + b1 * s2
        e = value - mu
        total += -0.5 * math.log(2.0 * math.pi * s2) - 0.5 * e**2 / s2
    assert garch_loglik(GARCH, params, np.array(y)) == pytest.approx(total, abs=1e-10)


def test_student_t_with_huge_dof_is_gaussian():
    y = simulate_garch(GARCH, TRUE, 100, seed=1).values
    spec_t = VolatilityModelSpec.from_name("GARCH-t")
    heavy = GarchParams(**{**TRUE.model_dump(), "nu": 1e6})
    assert garch_loglik(spec_t, heavy, y) == pytest.approx(garch_loglik(GARCH, TRUE, y), abs=1e-4)


@pytest.mark.parametrize(
    "name, neutral",
    [("GARCH-MA", {"psi": 0.0}), ("GARCH-GJR", {"gamma": 0.0}), ("GARCH-J", {"kappa": 0.0})],
)
def test_features_switched_off_match_baseline(name, neutral):
    y = simulate_garch(GARCH, TRUE, 400, seed=2).values
    params = GarchParams(**{**TRUE.model_dump(), **neutral})
    spec = VolatilityModelSpec.from_name(name)
    assert garch_loglik(spec, params, y) == pytest.approx(garch_loglik(GARCH, TRUE, y), abs=1e-12)


@pytest.mark.parametrize(
    "name, extra",
    [
        ("GARCH", {}),
        ("GARCH-2", {"beta1": 0.5, "beta2": 0.3}),
        ("GARCH-M", {"lam": 0.3}),
        ("GARCH-MA", {"psi": 0.4}),
        ("GARCH-GJR", {"alpha1": 0.05, "gamma": 0.1}),
    ],
)
def test_filter_inverts_simulation(name, extra):
    spec = VolatilityModelSpec.from_name(name)
    params = GarchParams(**{**TRUE.model_dump(), **extra})
    series = simulate_garch(spec, params, 500, seed=3)
    e, s2 = garch_filter(spec, params, series)
    z = np.random.default_rng(3).standard_normal(500)
    assert np.all(s2 > 0.0)
    np.testing.assert_allclose(e / np.sqrt(s2), z, atol=1e-8)


def test_sample_variance_initialisation():
    y = simulate_garch(GARCH, TRUE, 200, seed=4).values
    _, s2 = garch_filter(GARCH, TRUE, y, variance_init="sample")
    assert s2[0] == pytest.approx(np.var(y - TRUE.mu))
    _, s2 = garch_filter(GARCH, TRUE, y)
    assert s2[0] == pytest.approx(unconditional_variance(GARCH, TRUE))


def test_invalid_params():
    with pytest.raises(InvalidParams):
        garch_loglik(GARCH, GarchParams(alpha0=0.1, alpha1=0.5, beta1=0.6), np.zeros(10))
    with pytest.raises(InvalidParams):
        garch_loglik(GARCH, GarchParams(alpha0=0.0), np.zeros(10))
    with pytest.raises(InvalidParams):
        simulate_garch(VolatilityModelSpec.from_name("GARCH-t"), TRUE, 10, seed=0)
    with pytest.raises(InvalidParams):
        garch_loglik(VolatilityModelSpec.from_name("SV"), TRUE, np.zeros(10))


def test_underflow_is_floored_or_raised():
    y = np.zeros(20)
    y[-1] = 10.0
    params = GarchParams(alpha0=1e-4)
    with pytest.raises(NumericalUnderflow):
        garch_loglik(GARCH, params, y, strict=True)
    floored = garch_loglik(GARCH, params, y, quiet=True)
    calm = float(np.sum(stats.norm.logpdf(y[:-1], scale=1e-2)))
    assert floored == pytest.approx(calm + LOG_DENSITY_FLOOR)


def test_simulate_homoskedastic_variance():
    series = simulate_garch(GARCH, GarchParams(alpha0=2.0), 100_000, seed=5)
    assert series.name == "GARCH_sim"
    assert np.var(series.values) == pytest.approx(2.0, rel=0.05)


def test_simulate_is_deterministic_and_jump_free_matches_plain():
    plain = simulate_garch(GARCH, TRUE, 300, seed=6)
    again = simulate_garch(GARCH, TRUE, 300, seed=6)
    np.testing.assert_array_equal(plain.values, again.values)
    jump = VolatilityModelSpec.from_name("GARCH-J")
    no_jumps = GarchParams(**{**TRUE.model_dump(), "kappa": 0.0, "mu_j": 1.0, "sigma_j": 2.0})
    np.testing.assert_array_equal(simulate_garch(jump, no_jumps, 300, seed=6).values, plain.values)


@pytest.mark.parametrize("seed", [7, 8, 9])
def test_persistent_garch_has_fat_tails(seed):
    params = GarchParams(alpha0=0.05, alpha1=0.1, beta1=0.85)
    y = simulate_garch(GARCH, params, 100_000, seed=seed).values
    assert stats.kurtosis(y, fisher=False) > 3.0


@pytest.mark.parametrize("seed", range(5))
def test_likelihood_identifies_alpha1(seed):
    y = simulate_garch(GARCH, TRUE, 5000, seed=seed).values
    at_truth = garch_loglik(GARCH, TRUE, y)
    for factor in (0.5, 1.5):
        moved = GarchParams(**{**TRUE.model_dump(), "alpha1": TRUE.alpha1 * factor})
        assert at_truth > garch_loglik(GARCH, moved, y)


def test_fit_short_chains():
    y = simulate_garch(GARCH, TRUE, 1000, seed=10)
    config = McmcConfig(n_draws=2000, burn_in=1000, chains=2, seed=11)
    fit = fit_garch_bayes(GARCH, y, None, config)
    assert fit.draws.shape == (4000, 4)
    assert fit.names == GARCH.param_names
    assert all(0.1 <= rate <= 0.6 for rate in fit.acceptance_rates.values())
    assert all(r < 1.1 for r in fit.rhat.values())
    persistence = fit.column("alpha1") + fit.column("beta1")
    assert np.all(persistence < 1.0) and np.all(fit.column("alpha0") > 0.0)
    assert fit.timestamps is not None and len(fit.timestamps) == 1000

    vol = conditional_volatility(fit, y, max_draws=50)
    assert vol.name == "GARCH_vol"
    assert len(vol) == len(y)
    assert np.all(vol.values > 0.0)


def test_fit_is_deterministic():
    y = simulate_garch(GARCH, TRUE, 150, seed=12).values
    config = McmcConfig(n_draws=1000, burn_in=200, chains=1, seed=13)
    first = fit_garch_bayes(GARCH, y, None, config)
    second = fit_garch_bayes(GARCH, y, None, config)
    np.testing.assert_array_equal(first.draws, second.draws)


def test_fit_rejects_short_and_constant_data():
    config = McmcConfig(n_draws=1000, seed=0)
    with pytest.raises(TooShort):
        fit_garch_bayes(GARCH, np.random.default_rng(0).standard_normal(50), None, config)
    with pytest.raises(ChainDivergence):
        fit_garch_bayes(GARCH, Series.from_array("flat", np.ones(200)), None, config)


@pytest.mark.slow
def test_posterior_calibration():
    covered = 0
    for seed in range(50):
        y = simulate_garch(GARCH, TRUE, 2000, seed=100 + seed)
        fit = fit_garch_bayes(GARCH, y, None, McmcConfig(n_draws=2000, burn_in=1000, chains=1, seed=seed))
        ok = True
        for name in ("alpha0", "alpha1", "beta1"):
            draws = fit.column(name)
            ok &= abs(draws.mean() - getattr(TRUE, name)) <= 3.0 * draws.std()
        covered += ok
    assert covered >= 45
