"""
Tests for the importance-sampling marginal likelihood, Bayes factors and rankings.
"""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.special import logsumexp

from econometrics.errors import DataMismatch, DegenerateWeights, EmptyEstimates
from econometrics.garch import fit_garch_bayes, simulate_garch
from econometrics.model_comparison import (
    GaussianProposal,
    bayes_factor,
    importance_sampling_log_ml,
    marginal_likelihood,
    ranking_table,
)
from econometrics.priors import ParameterSpace, ScalarComponent
from econometrics.sv import fit_sv_bayes, simulate_sv
from models.volatility import (
    GarchParams,
    MarginalLikelihoodEstimate,
    McmcConfig,
    PosteriorDraws,
    PriorKind,
    ScalarPrior,
    SvParams,
    VolatilityModelSpec,
)

THETA_SPACE = ParameterSpace([ScalarComponent("theta", ScalarPrior(kind=PriorKind.NORMAL, a=0.0, b=1.0))])


def _conjugate_case(n=20, seed=0):
    """y_i ~ N(theta, 1) with theta ~ N(0, 1): exact posterior and evidence."""
    y = np.random.default_rng(seed).normal(0.7, 1.0, size=n)
    post_var = 1.0 / (n + 1.0)
    posterior = np.random.default_rng(seed + 1).normal(post_var * y.sum(), math.sqrt(post_var), size=(2000, 1))
    evidence = stats.multivariate_normal(np.zeros(n), np.eye(n) + 1.0).logpdf(y)

    def loglik(x, _):
        return float(-0.5 * n * math.log(2.0 * math.pi) - 0.5 * np.sum((y - x[0]) ** 2)), 0.0

    return loglik, posterior, float(evidence)


def _estimate(name, log_ml, nse=0.1, fingerprint="abc"):
    return MarginalLikelihoodEstimate(
        spec=VolatilityModelSpec.from_name(name),
        log_ml=log_ml,
        nse=nse,
        n_is_draws=1000,
        ess=500.0,
        data_fingerprint=fingerprint,
    )


def test_conjugate_oracle():
    loglik, posterior, evidence = _conjugate_case()
    result = importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 5000, seed=1)
    assert result.log_ml == pytest.approx(evidence, abs=max(0.05, 3.0 * result.nse))
    assert result.n_failed == 0
    assert 0.0 < result.ess <= 5000


def test_full_covariance_proposal_agrees():
    loglik, posterior, evidence = _conjugate_case(seed=2)
    result = importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 5000, seed=3, full_cov=True)
    assert result.log_ml == pytest.approx(evidence, abs=max(0.05, 3.0 * result.nse))


def test_prior_as_proposal_matches_direct_monte_carlo():
    y = np.array([0.5, -0.3])

    def loglik(x, _):
        return float(stats.norm.logpdf(y, loc=x[0], scale=10.0).sum()), 0.0

    prior = GaussianProposal(mean=np.zeros(1), cov=np.eye(1))
    result = importance_sampling_log_ml(THETA_SPACE, loglik, None, 4000, seed=4, proposal=prior)

    theta = np.random.default_rng(5).standard_normal(100_000)
    values = stats.norm.logpdf(y[:, None], loc=theta, scale=10.0).sum(axis=0)
    direct = float(logsumexp(values) - math.log(len(theta)))
    w = np.exp(values - values.max())
    direct_se = float(w.std(ddof=1) / (math.sqrt(len(w)) * w.mean()))
    assert result.log_ml == pytest.approx(direct, abs=3.0 * (result.nse + direct_se) + 1e-4)


def test_estimate_is_deterministic():
    loglik, posterior, _ = _conjugate_case(seed=6)
    first = importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 500, seed=7)
    second = importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 500, seed=7)
    assert first == second


def test_nse_shrinks_at_monte_carlo_rate():
    loglik, posterior, _ = _conjugate_case(seed=8)
    small = [importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 250, seed=s).nse for s in range(20)]
    large = [importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 1000, seed=50 + s).nse for s in range(20)]
    assert np.mean(large) / np.mean(small) == pytest.approx(0.5, rel=0.2)


def test_raw_estimator_is_unbiased_on_conjugate_oracle():
    loglik, posterior, evidence = _conjugate_case(seed=9)
    ratios = [
        math.exp(importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 200, seed=s).log_ml - evidence)
        for s in range(50)
    ]
    assert 0.8 <= np.mean(ratios) <= 1.2


def test_failed_likelihoods_get_zero_weight():
    loglik, posterior, _ = _conjugate_case(seed=10)

    def flaky(x, seed):
        if x[0] > 0.9:
            raise DegenerateWeights(0.0, 10)
        return loglik(x, seed)

    result = importance_sampling_log_ml(THETA_SPACE, flaky, posterior, 1000, seed=11)
    assert result.n_failed > 0
    assert np.isfinite(result.log_ml)

    def broken(x, seed):
        raise DegenerateWeights(0.0, 10)

    with pytest.raises(DegenerateWeights):
        importance_sampling_log_ml(THETA_SPACE, broken, posterior, 100, seed=12)


def test_inner_error_enters_outer_nse():
    loglik, posterior, _ = _conjugate_case(seed=13)

    def noisy(x, seed):
        value, _ = loglik(x, seed)
        return value, 0.5

    exact = importance_sampling_log_ml(THETA_SPACE, loglik, posterior, 1000, seed=14)
    inner = importance_sampling_log_ml(THETA_SPACE, noisy, posterior, 1000, seed=14)
    assert inner.log_ml == exact.log_ml
    assert inner.nse > exact.nse


@pytest.fixture(scope="module")
def garch_fit():
    spec = VolatilityModelSpec.from_name("GARCH")
    y = simulate_garch(spec, GarchParams(alpha0=0.1, alpha1=0.1, beta1=0.8), 500, seed=20)
    fit = fit_garch_bayes(spec, y, None, McmcConfig(n_draws=1000, burn_in=500, chains=2, seed=21))
    return fit, y


def test_garch_marginal_likelihood(garch_fit):
    fit, y = garch_fit
    first = marginal_likelihood(fit, y, 1000, seed=22)
    again = marginal_likelihood(fit, y, 1000, seed=22)
    other = marginal_likelihood(fit, y, 1000, seed=23, full_cov=True)
    reference = marginal_likelihood(fit, y, 1000, seed=22, full_cov=True)
    assert np.isfinite(first.log_ml) and first.nse >= 0.0
    assert first.log_ml == again.log_ml
    assert first.data_fingerprint == fit.data_fingerprint
    combined = math.hypot(reference.nse, other.nse)
    assert abs(bayes_factor(reference, other)) <= 3.0 * combined + 1e-6


def test_proposal_sample_halves_agree(garch_fit):
    fit, y = garch_fit
    half = fit.n_draws // 2
    early = marginal_likelihood(fit, y, 2000, seed=24, full_cov=True, proposal_rows=slice(0, half))
    late = marginal_likelihood(fit, y, 2000, seed=25, full_cov=True, proposal_rows=slice(half, None))
    assert abs(early.log_ml - late.log_ml) <= 3.0 * math.hypot(early.nse, late.nse) + 1e-6


def test_marginal_likelihood_guards(garch_fit):
    fit, y = garch_fit
    with pytest.raises(DataMismatch):
        marginal_likelihood(fit, y.values[::-1].copy(), 100, seed=0)
    short = PosteriorDraws(
        spec=fit.spec,
        names=fit.names,
        draws=fit.draws[:10],
        chain=fit.chain[:10],
        acceptance_rates=fit.acceptance_rates,
        seed=fit.seed,
        data_fingerprint=fit.data_fingerprint,
    )
    with pytest.raises(ValueError):
        marginal_likelihood(short, y, 100, seed=0)


def test_sv_marginal_likelihood():
    spec = VolatilityModelSpec.from_name("SV")
    y = simulate_sv(spec, SvParams(mu=0.0, mu_h=-1.0, phi=0.9, sigma_h=0.3), 150, seed=30)
    fit = fit_sv_bayes(spec, y, None, McmcConfig(n_draws=1000, burn_in=200, chains=1, seed=31))
    estimate = marginal_likelihood(fit, y, 100, seed=32, n_inner_draws=20)
    assert np.isfinite(estimate.log_ml)
    assert estimate.nse >= 0.0
    assert estimate.ess <= estimate.n_is_draws


def test_bayes_factor():
    a = _estimate("GARCH", -100.0)
    b = _estimate("SV", -104.5)
    assert bayes_factor(a, a) == 0.0
    assert bayes_factor(a, b) == pytest.approx(4.5)
    with pytest.raises(DataMismatch):
        bayes_factor(a, _estimate("SV", -90.0, fingerprint="other"))


def test_ranking_table():
    table = ranking_table(
        [_estimate("SV", -101.0), _estimate("GARCH-t", -99.0), _estimate("GARCH", -101.0)], series="oil"
    )
    assert [r.model for r in table.rows] == ["GARCH-t", "GARCH", "SV"]
    assert [r.rank for r in table.rows] == [1, 2, 3]
    assert table.best == "GARCH-t"
    assert table.position("SV") == 3
    assert table.rows[0].log_bf_vs_best == 0.0
    assert table.rows[2].log_bf_vs_best == pytest.approx(-2.0)
    assert table.series == "oil"

    shuffled = ranking_table([_estimate("GARCH", -101.0), _estimate("GARCH-t", -99.0), _estimate("SV", -101.0)])
    assert [r.model for r in shuffled.rows] == [r.model for r in table.rows]


def test_ranking_table_errors():
    with pytest.raises(EmptyEstimates):
        ranking_table([_estimate("GARCH", -1.0)])
    with pytest.raises(DataMismatch):
        ranking_table([_estimate("GARCH", -1.0), _estimate("SV", -2.0, fingerprint="other")])


@pytest.mark.slow
def test_student_t_data_favour_garch_t():
    plain = VolatilityModelSpec.from_name("GARCH")
    heavy = VolatilityModelSpec.from_name("GARCH-t")
    truth = GarchParams(alpha0=0.1, alpha1=0.1, beta1=0.8, nu=5.0)
    wins = 0
    for seed in range(10):
        y = simulate_garch(heavy, truth, 1500, seed=600 + seed)
        config = McmcConfig(n_draws=2000, burn_in=1000, chains=1, seed=seed)
        estimates = [
            marginal_likelihood(fit_garch_bayes(spec, y, None, config), y, 2000, seed=seed)
            for spec in (plain, heavy)
        ]
        wins += ranking_table(estimates).best == "GARCH-t"
    assert wins >= 8


@pytest.mark.slow
def test_ma_data_favour_sv_ma():
    plain = VolatilityModelSpec.from_name("SV")
    ma = VolatilityModelSpec.from_name("SV-MA")
    truth = SvParams(mu=0.0, mu_h=-1.0, phi=0.95, sigma_h=0.2, psi=0.5)
    wins = 0
    for seed in range(10):
        y = simulate_sv(ma, truth, 1000, seed=700 + seed)
        config = McmcConfig(n_draws=1000, burn_in=500, chains=1, seed=seed)
        estimates = [
            marginal_likelihood(fit_sv_bayes(spec, y, None, config), y, 500, seed=seed)
            for spec in (plain, ma)
        ]
        wins += ranking_table(estimates).best == "SV-MA"
    assert wins >= 7
