"""
GARCH-family likelihoods, simulation and Bayesian estimation.

The conditional variance follows

    s2_t = alpha0 + (alpha1 + gamma 1{e_{t-1} < 0}) e_{t-1}^2 + beta1 s2_{t-1} + beta2 s2_{t-2}

started at its unconditional level. The innovation e_t is y_t - mu, less lam * s2_t for
the in-mean variant, and filtered through (1 + psi L)^-1 for the MA(1) variant. Jump
models add a Bernoulli(kappa) normal(mu_j, sigma_j^2) jump to e_t and integrate it out
per observation as a two-component mixture.
"""

from typing import Literal, Optional, Union

import logfire
import numpy as np
from scipy import stats
from scipy.optimize import minimize
from scipy.signal import lfilter, lfiltic

from econometrics.errors import ChainDivergence, InvalidParams, NumericalUnderflow, TooShort
from econometrics.mcmc import gelman_rubin, proposal_covariance, run_chain, spawn_generators
from econometrics.priors import build_space
from models.schema import Series
from models.volatility import (
    Family,
    Feature,
    GarchParams,
    McmcConfig,
    PosteriorDraws,
    PriorConfig,
    VolatilityModelSpec,
    data_fingerprint,
    params_from_vector,
)

# Per-observation log-density floor.
LOG_DENSITY_FLOOR = -1.0e3

MIN_OBSERVATIONS = 100

VarianceInit = Literal["unconditional", "sample"]


def _values(y: Union[Series, np.ndarray]) -> np.ndarray:
    return np.asarray(y.values if isinstance(y, Series) else y, dtype=float)


def _check_family(spec: VolatilityModelSpec) -> None:
    if spec.family != Family.GARCH:
        raise InvalidParams(f"{spec.name} is not a GARCH-family model")


def unconditional_variance(spec: VolatilityModelSpec, params: GarchParams) -> float:
    """Stationary mean of s2_t; jump variance feeds the recursion through e_t^2."""
    p = params
    jump_second_moment = p.kappa * (p.mu_j**2 + p.sigma_j**2) if spec.has(Feature.JUMP) else 0.0
    shock_loading = p.alpha1 + 0.5 * p.gamma
    return (p.alpha0 + shock_loading * jump_second_moment) / (1.0 - p.persistence)


def _initial_variance(
    spec: VolatilityModelSpec, params: GarchParams, y: np.ndarray, variance_init: VarianceInit
) -> float:
    if variance_init == "sample":
        return float(np.var(y - params.mu))
    return unconditional_variance(spec, params)


def _recursion_filter(e: np.ndarray, p: GarchParams, s0: float) -> np.ndarray:
    drive = p.alpha0 + (p.alpha1 + p.gamma * (e < 0.0)) * e**2
    a = [1.0, -p.beta1, -p.beta2]
    zi = lfiltic([1.0], a, y=[s0, s0])
    tail, _ = lfilter([1.0], a, drive[:-1], zi=zi)
    return np.concatenate([[s0], tail])


def _filter_in_mean(spec: VolatilityModelSpec, p: GarchParams, y: np.ndarray, s0: float):
    n = len(y)
    e = np.empty(n)
    s2 = np.empty(n)
    ma = p.psi if spec.has(Feature.MA1) else 0.0
    for t in range(n):
        if t == 0:
            s2[t] = s0
        else:
            prev = e[t - 1]
            lagged = s2[t - 2] if t >= 2 else s0
            s2[t] = (
                p.alpha0
                + (p.alpha1 + p.gamma * (prev < 0.0)) * prev**2
                + p.beta1 * s2[t - 1]
                + p.beta2 * lagged
            )
        e[t] = y[t] - p.mu - p.lam * s2[t] - (ma * e[t - 1] if t else 0.0)
    return e, s2


def garch_filter(
    spec: VolatilityModelSpec,
    params: GarchParams,
    y: Union[Series, np.ndarray],
    variance_init: VarianceInit = "unconditional",
):
    """
    Run the mean and variance recursions.

    Returns:
        Tuple of the innovations e_t and conditional variances s2_t.
    """
    values = _values(y)
    p = params
    s0 = _initial_variance(spec, p, values, variance_init)
    if spec.has(Feature.IN_MEAN):
        return _filter_in_mean(spec, p, values, s0)
    e = values - p.mu
    if spec.has(Feature.MA1):
        e = lfilter([1.0], [1.0, p.psi], e)
    return e, _recursion_filter(e, p, s0)


def _log_density(spec: VolatilityModelSpec, p: GarchParams, e: np.ndarray, s2: np.ndarray) -> np.ndarray:
    if spec.has(Feature.STUDENT_T):
        return stats.t.logpdf(e, df=p.nu, scale=np.sqrt(s2 * (p.nu - 2.0) / p.nu))
    if spec.has(Feature.JUMP):
        with np.errstate(divide="ignore"):
            calm = np.log1p(-p.kappa) + stats.norm.logpdf(e, scale=np.sqrt(s2))
            jump = np.log(p.kappa) + stats.norm.logpdf(e, loc=p.mu_j, scale=np.sqrt(s2 + p.sigma_j**2))
        return np.logaddexp(calm, jump)
    return stats.norm.logpdf(e, scale=np.sqrt(s2))


def _floored_terms(spec, p, y, variance_init):
    e, s2 = garch_filter(spec, p, y, variance_init)
    terms = _log_density(spec, p, e, s2)
    low = ~(terms >= LOG_DENSITY_FLOOR)
    return np.where(low, LOG_DENSITY_FLOOR, terms), low


def garch_loglik(
    spec: VolatilityModelSpec,
    params: GarchParams,
    y: Union[Series, np.ndarray],
    variance_init: VarianceInit = "unconditional",
    strict: bool = False,
    quiet: bool = False,
) -> float:
    """
    Exact log-likelihood of a GARCH-family model.

    Per-observation log densities below LOG_DENSITY_FLOOR are floored and flagged with a
    warning, or raise NumericalUnderflow when ``strict``. ``quiet`` skips the warning.
    """
    _check_family(spec)
    params.validate_for(spec)
    terms, low = _floored_terms(spec, params, y, variance_init)
    if low.any():
        first = int(np.flatnonzero(low)[0])
        if strict:
            raise NumericalUnderflow(f"{spec.name}: log density below floor at observation {first}")
        if not quiet:
            logfire.warn(
                "Log density floored",
                model=spec.name,
                n_floored=int(low.sum()),
                first_index=first,
            )
    return float(np.sum(terms))


def _draw_streams(spec: VolatilityModelSpec, p: GarchParams, n: int, rng: np.random.Generator):
    # Fixed draw order keeps paths comparable across feature toggles at one seed.
    z = rng.standard_normal(n)
    u = rng.random(n)
    size = rng.standard_normal(n)
    if spec.has(Feature.STUDENT_T):
        z = z * np.sqrt((p.nu - 2.0) / rng.chisquare(p.nu, n))
    jumps = (u < p.kappa) * (p.mu_j + p.sigma_j * size)
    return z, jumps


def simulate_garch(
    spec: VolatilityModelSpec,
    params: GarchParams,
    n: int,
    seed: int,
    start: str = "1900-01",
) -> Series:
    """Forward simulation of the model from its unconditional variance."""
    _check_family(spec)
    p = params.validate_for(spec)
    z, jumps = _draw_streams(spec, p, n, np.random.default_rng(seed))
    s0 = unconditional_variance(spec, p)
    lam = p.lam if spec.has(Feature.IN_MEAN) else 0.0
    psi = p.psi if spec.has(Feature.MA1) else 0.0

    e = np.empty(n)
    s2 = np.empty(n)
    y = np.empty(n)
    for t in range(n):
        if t == 0:
            s2[t] = s0
        else:
            prev = e[t - 1]
            lagged = s2[t - 2] if t >= 2 else s0
            s2[t] = (
                p.alpha0
                + (p.alpha1 + p.gamma * (prev < 0.0)) * prev**2
                + p.beta1 * s2[t - 1]
                + p.beta2 * lagged
            )
        e[t] = np.sqrt(s2[t]) * z[t] + jumps[t]
        y[t] = p.mu + lam * s2[t] + e[t] + (psi * e[t - 1] if t else 0.0)
    return Series.from_array(f"{spec.name}_sim", y, start=start)


def starting_values(spec: VolatilityModelSpec, y: np.ndarray) -> np.ndarray:
    """Moment-based natural-scale starting point inside the support."""
    var = float(np.var(y))
    guess = {
        "mu": float(np.mean(y)),
        "alpha0": 0.1 * var,
        "alpha1": 0.1,
        "beta1": 0.8,
        "beta2": 0.0,
        "gamma": 0.0,
        "psi": 0.0,
        "nu": 8.0,
        "lam": 0.0,
        "kappa": 0.02,
        "mu_j": 0.0,
        "sigma_j": float(np.sqrt(var)),
    }
    if spec.variance_lags == 2:
        guess.update(beta1=0.5, beta2=0.3)
    if spec.has(Feature.LEVERAGE):
        guess.update(alpha1=0.05, gamma=0.1)
    return np.array([guess[name] for name in spec.param_names])


def fit_garch_bayes(
    spec: VolatilityModelSpec,
    y: Union[Series, np.ndarray],
    prior_config: Optional[PriorConfig],
    mcmc_config: McmcConfig,
    variance_init: VarianceInit = "unconditional",
) -> PosteriorDraws:
    """
    Posterior draws by adaptive random-walk Metropolis on the unconstrained scale.

    Chains start from the posterior mode, jittered by the inverse Hessian there, and use
    independent generators spawned from ``mcmc_config.seed``.
    """
    _check_family(spec)
    values = _values(y)
    if len(values) < MIN_OBSERVATIONS:
        raise TooShort(f"{spec.name} needs at least {MIN_OBSERVATIONS} observations, got {len(values)}")
    if np.ptp(values) == 0.0:
        raise ChainDivergence(f"{spec.name}: constant series, variance parameters are not identified")

    space = build_space(spec, prior_config)

    def log_posterior(z: np.ndarray) -> float:
        x = space.to_natural(z)
        log_prior = space.log_prior(x)
        if not np.isfinite(log_prior):
            return -np.inf
        try:
            params = params_from_vector(spec, x).validate_for(spec)
        except InvalidParams:
            return -np.inf
        terms, _ = _floored_terms(spec, params, values, variance_init)
        total = float(np.sum(terms)) + log_prior + space.log_jacobian(z)
        return total if np.isfinite(total) else -np.inf

    z0 = space.from_natural(starting_values(spec, values))

    def objective(z: np.ndarray) -> float:
        value = log_posterior(z)
        return -value if np.isfinite(value) else 1e10

    with logfire.span("fit_garch_bayes {model}", model=spec.name, nobs=len(values)):
        opt = minimize(objective, z0, method="BFGS")
        mode = opt.x if np.isfinite(log_posterior(opt.x)) else z0
        cov = proposal_covariance(getattr(opt, "hess_inv", None), space.dim)
        jitter = np.linalg.cholesky(cov)

        chains, rates = [], []
        for i, rng in enumerate(spawn_generators(mcmc_config.seed, mcmc_config.chains)):
            start = mode + jitter @ rng.standard_normal(space.dim)
            if not np.isfinite(log_posterior(start)):
                start = mode
            result = run_chain(
                log_posterior,
                start,
                n_keep=mcmc_config.n_draws,
                burn_in=mcmc_config.burn_in,
                thin=mcmc_config.thin,
                initial_cov=cov,
                rng=rng,
                target=mcmc_config.target_acceptance,
                label=f"{spec.name}[{i}]",
            )
            if result.acceptance_rate < mcmc_config.min_acceptance:
                raise ChainDivergence(
                    f"{spec.name} chain {i}: acceptance rate {result.acceptance_rate:.4f} after adaptation"
                )
            chains.append(space.to_natural(result.draws))
            rates.append(result.acceptance_rate)

        rhat = gelman_rubin(chains)
        draws = np.vstack(chains)
        logfire.info(
            "GARCH fit complete",
            model=spec.name,
            draws=len(draws),
            acceptance_rates=rates,
            max_rhat=float(np.nanmax(rhat)) if np.any(np.isfinite(rhat)) else None,
        )

    return PosteriorDraws(
        spec=spec,
        names=space.names,
        draws=draws,
        chain=np.repeat(np.arange(len(chains)), mcmc_config.n_draws),
        acceptance_rates={f"chain{i}": r for i, r in enumerate(rates)},
        rhat=dict(zip(space.names, rhat.tolist())),
        seed=mcmc_config.seed,
        data_fingerprint=data_fingerprint(values),
        timestamps=y.timestamps if isinstance(y, Series) else None,
    )


def conditional_volatility(
    fit: PosteriorDraws,
    y: Union[Series, np.ndarray],
    max_draws: int = 200,
    variance_init: VarianceInit = "unconditional",
) -> Series:
    """Posterior mean of the conditional standard deviation s_t over evenly spaced draws."""
    values = _values(y)
    picks = np.unique(np.linspace(0, fit.n_draws - 1, min(max_draws, fit.n_draws)).astype(int))
    total = np.zeros(len(values))
    for row in fit.draws[picks]:
        params = params_from_vector(fit.spec, row)
        total += np.sqrt(garch_filter(fit.spec, params, values, variance_init)[1])
    vol = total / len(picks)
    name = f"{fit.spec.name}_vol"
    if isinstance(y, Series):
        return Series(name=name, timestamps=y.timestamps, values=vol)
    return Series.from_array(name, vol)
