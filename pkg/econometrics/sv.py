"""
Stochastic volatility models: latent-state sampling, estimation and simulation.

    y_t = mu + lam m(h_t) + e_t (+ psi e_{t-1}) (+ jump_t),   e_t ~ exp(h_t / 2) x standardised noise
    h_t - mu_h = phi (h_{t-1} - mu_h) (+ phi2 (h_{t-2} - mu_h)) + eta_t,   eta_t ~ N(0, sigma_h^2)

with m(h) = h or exp(h) for the in-mean variant and the state started from its
stationary distribution. For SV-L the pair (e_t, eta_{t+1}) has correlation rho.

The log-volatility vector is drawn in one block. The AR prior on h has a banded
precision H'H / sigma_h^2 with H lower-triangular, so the Gaussian approximation at the
conditional mode is handled with banded Cholesky factors in O(T). That approximation
is the proposal of an independence Metropolis-Hastings step and the importance density
of the integrated likelihood.
"""

import math
from typing import List, Literal, Optional, Tuple, Union

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import sparse
from scipy.linalg import cholesky_banded, solve_banded, solveh_banded
from scipy.signal import lfilter
from scipy.special import gammaln, logsumexp

from econometrics.errors import (
    ChainDivergence,
    DegenerateWeights,
    EmptyFit,
    InvalidParams,
    ModeSearchFailure,
    TooShort,
)
from econometrics.mcmc import AdaptiveRandomWalk, gelman_rubin, spawn_generators
from econometrics.priors import build_space, conjugate_state_priors
from models.schema import Series
from models.volatility import (
    Family,
    Feature,
    McmcConfig,
    PosteriorDraws,
    PriorConfig,
    SvParams,
    VolatilityModelSpec,
    data_fingerprint,
    params_from_vector,
)

InMeanScale = Literal["h", "exp_h"]

MAX_NEWTON_ITERATIONS = 100
MIN_OBSERVATIONS = 100
MIN_ESS_FRACTION = 0.01
LOG_2PI = math.log(2.0 * math.pi)


class LatentPath(BaseModel):
    """One draw of the log-variance path."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    h: np.ndarray = Field(description="Log variances, one per observation")
    loglik_at_path: float = Field(description="log p(y | h, theta)")
    log_target: float = Field(description="log p(y | h, theta) + log p(h | theta)")
    accepted: bool
    acceptance_probability: float = Field(ge=0.0, le=1.0)

    @field_validator("h")
    @classmethod
    def _finite(cls, v: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(v)):
            raise ValueError("latent path must be finite")
        return v


class IntegratedLikelihood(BaseModel):
    """Importance-sampling estimate of log p(y | theta)."""

    model_config = ConfigDict(frozen=True)

    value: float
    nse: float = Field(ge=0.0)
    ess: float
    n_draws: int


def _values(y: Union[Series, np.ndarray]) -> np.ndarray:
    return np.asarray(y.values if isinstance(y, Series) else y, dtype=float)


def _check_family(spec: VolatilityModelSpec) -> None:
    if spec.family != Family.SV:
        raise InvalidParams(f"{spec.name} is not a stochastic volatility model")


def _stationary_start(phi: float, phi2: float) -> np.ndarray:
    """Cholesky factor of the stationary covariance of (h_1, h_2) over sigma_h^2."""
    gamma0 = (1.0 - phi2) / ((1.0 + phi2) * ((1.0 - phi2) ** 2 - phi**2))
    gamma1 = phi * gamma0 / (1.0 - phi2)
    return np.linalg.cholesky(np.array([[gamma0, gamma1], [gamma1, gamma0]]))


def transition_matrix(params: SvParams, n: int, lags: int) -> Tuple[sparse.csr_matrix, float]:
    """
    Lower-triangular H with H (h - mu_h) ~ N(0, sigma_h^2 I).

    Returns:
        H and log |det H|.
    """
    if lags == 1:
        main = np.ones(n)
        main[0] = math.sqrt(1.0 - params.phi**2)
        H = sparse.diags([main, np.full(n - 1, -params.phi)], [0, -1], format="csr")
        return H, float(np.log(main[0]))
    if n < 3:
        raise TooShort("the AR(2) state needs at least three observations")
    start = np.linalg.inv(_stationary_start(params.phi, params.phi2))
    main = np.ones(n)
    main[0], main[1] = start[0, 0], start[1, 1]
    first = np.full(n - 1, -params.phi)
    first[0] = start[1, 0]
    H = sparse.diags([main, first, np.full(n - 2, -params.phi2)], [0, -1, -2], format="csr")
    return H, float(np.log(main[0]) + np.log(main[1]))


def _upper_banded(matrix: sparse.spmatrix, u: int) -> np.ndarray:
    n = matrix.shape[0]
    ab = np.zeros((u + 1, n))
    for k in range(u + 1):
        ab[u - k, k:] = matrix.diagonal(k)
    return ab


def _column(v: np.ndarray, like: np.ndarray) -> np.ndarray:
    return v[:, None] if like.ndim == 2 else v


class StateSpaceTarget:
    """
    log p(y | h, theta) + log p(h | theta) for fixed parameters.

    Log-density methods accept one path or a T x m stack of paths.
    """

    def __init__(
        self,
        spec: VolatilityModelSpec,
        params: SvParams,
        y: np.ndarray,
        in_mean_scale: InMeanScale = "h",
    ) -> None:
        self.spec = spec
        self.p = params
        self.n = len(y)
        self.in_mean_scale = in_mean_scale
        self.bandwidth = spec.variance_lags
        self.H, self.log_det_H = transition_matrix(params, self.n, spec.variance_lags)
        self.state_var = params.sigma_h**2
        self.precision = (self.H.T @ self.H).tocsr() / self.state_var
        self.prior_banded = _upper_banded(self.precision, self.bandwidth)
        base = y - params.mu
        if spec.has(Feature.MA1):
            base = lfilter([1.0], [1.0, params.psi], base)
        self.base = base

    # Prior

    def prior_logpdf(self, h: np.ndarray):
        e = self.H @ (h - self.p.mu_h)
        quad = np.sum(e**2, axis=0) / self.state_var
        return -0.5 * self.n * (LOG_2PI + math.log(self.state_var)) + self.log_det_H - 0.5 * quad

    def prior_gradient(self, h: np.ndarray) -> np.ndarray:
        return -(self.precision @ (h - self.p.mu_h))

    # Observation

    def _residual(self, h: np.ndarray) -> np.ndarray:
        base = _column(self.base, h)
        if not self.spec.has(Feature.IN_MEAN):
            return np.broadcast_to(base, h.shape)
        driver = h if self.in_mean_scale == "h" else np.exp(h)
        return base - self.p.lam * driver

    def _pointwise(self, h: np.ndarray, r: np.ndarray) -> np.ndarray:
        p = self.p
        if self.spec.has(Feature.STUDENT_T):
            nu = p.nu
            const = gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * math.log(math.pi * (nu - 2.0))
            return const - 0.5 * h - 0.5 * (nu + 1.0) * np.log1p(r**2 * np.exp(-h) / (nu - 2.0))
        if self.spec.has(Feature.JUMP):
            v1, v2 = np.exp(h), np.exp(h) + p.sigma_j**2
            with np.errstate(divide="ignore"):
                calm = math.log1p(-p.kappa) - 0.5 * (LOG_2PI + np.log(v1) + r**2 / v1)
                jump = np.log(p.kappa) - 0.5 * (LOG_2PI + np.log(v2) + (r - p.mu_j) ** 2 / v2)
            return np.logaddexp(calm, jump)
        return -0.5 * (LOG_2PI + h + r**2 * np.exp(-h))

    def _leverage_logpdf(self, h: np.ndarray):
        p = self.p
        base = _column(self.base, h)
        a, b = h[:-1], h[1:]
        scale = 1.0 - p.rho**2
        d = base[:-1] * np.exp(-0.5 * a) - (p.rho / p.sigma_h) * (b - p.mu_h - p.phi * (a - p.mu_h))
        pairs = -0.5 * (LOG_2PI + math.log(scale)) - 0.5 * a - 0.5 * d**2 / scale
        last = -0.5 * (LOG_2PI + h[-1] + base[-1] ** 2 * np.exp(-h[-1]))
        return np.sum(pairs, axis=0) + last

    def obs_logpdf(self, h: np.ndarray):
        if self.spec.has(Feature.LEVERAGE):
            return self._leverage_logpdf(h)
        return np.sum(self._pointwise(h, self._residual(h)), axis=0)

    def log_target(self, h: np.ndarray):
        return self.obs_logpdf(h) + self.prior_logpdf(h)

    def obs_derivatives(self, h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Gradient of the observation log density and a positive semi-definite
        curvature matrix in upper banded form, for a single path.
        """
        if self.spec.has(Feature.LEVERAGE):
            return self._leverage_derivatives(h)
        p = self.p
        r = self._residual(h)
        inv_v = np.exp(-h)
        if self.spec.has(Feature.STUDENT_T):
            u = r**2 * inv_v / (p.nu - 2.0)
            grad = -0.5 + 0.5 * (p.nu + 1.0) * u / (1.0 + u)
            curv = 0.5 * (p.nu + 1.0) * u / (1.0 + u) ** 2
        elif self.spec.has(Feature.JUMP):
            grad, curv = self._jump_derivatives(h, r)
        elif self.spec.has(Feature.IN_MEAN) and self.in_mean_scale == "h":
            lam = p.lam
            grad = -0.5 + lam * r * inv_v + 0.5 * r**2 * inv_v
            curv = inv_v * (lam**2 + 2.0 * lam * r + 0.5 * r**2)
        elif self.spec.has(Feature.IN_MEAN):
            lam = p.lam
            grad = -0.5 + lam * r + 0.5 * r**2 * inv_v
            curv = lam**2 * np.exp(h) + lam * r + 0.5 * r**2 * inv_v
        else:
            grad = -0.5 + 0.5 * r**2 * inv_v
            curv = 0.5 * r**2 * inv_v
        banded = np.zeros((self.bandwidth + 1, self.n))
        banded[-1] = np.maximum(curv, 0.0)
        return grad, banded

    def _jump_derivatives(self, h: np.ndarray, r: np.ndarray):
        p = self.p
        ev = np.exp(h)
        means = (0.0, p.mu_j)
        variances = (ev, ev + p.sigma_j**2)
        with np.errstate(divide="ignore"):
            log_weights = (math.log1p(-p.kappa), np.log(p.kappa))
        logs, firsts, seconds = [], [], []
        for lw, m, v in zip(log_weights, means, variances):
            q = (r - m) ** 2
            logs.append(lw - 0.5 * (LOG_2PI + np.log(v) + q / v))
            a = -0.5 / v + 0.5 * q / v**2
            g = ev * a
            firsts.append(g)
            seconds.append(g + ev**2 * (0.5 / v**2 - q / v**3) + g**2)
        stacked = np.stack(logs)
        resp = np.exp(stacked - logsumexp(stacked, axis=0))
        grad = resp[0] * firsts[0] + resp[1] * firsts[1]
        second = resp[0] * seconds[0] + resp[1] * seconds[1] - grad**2
        return grad, -second

    def _leverage_derivatives(self, h: np.ndarray):
        p = self.p
        n = self.n
        base = self.base
        scale = 1.0 / (1.0 - p.rho**2)
        a, b = h[:-1], h[1:]
        half = np.exp(-0.5 * a)
        d = base[:-1] * half - (p.rho / p.sigma_h) * (b - p.mu_h - p.phi * (a - p.mu_h))
        d_a = -0.5 * base[:-1] * half + p.rho * p.phi / p.sigma_h
        d_b = -p.rho / p.sigma_h
        d_aa = 0.25 * base[:-1] * half

        grad = np.zeros(n)
        grad[:-1] += -0.5 - scale * d * d_a
        grad[1:] += -scale * d * d_b
        grad[-1] += -0.5 + 0.5 * base[-1] ** 2 * math.exp(-h[-1])

        banded = np.zeros((2, n))
        banded[1, :-1] += scale * (d_a**2 + np.maximum(d * d_aa, 0.0))
        banded[1, 1:] += scale * d_b**2
        banded[1, -1] += 0.5 * base[-1] ** 2 * math.exp(-h[-1])
        banded[0, 1:] += scale * d_a * d_b
        return grad, banded


class GaussianApproximation:
    """N(mode, K^-1) with K held as an upper banded Cholesky factor."""

    def __init__(self, mode: np.ndarray, precision_banded: np.ndarray) -> None:
        self.mode = mode
        self.u = precision_banded.shape[0] - 1
        self.chol = cholesky_banded(precision_banded)
        self.half_log_det = float(np.sum(np.log(self.chol[self.u])))

    def draw(self, noise: np.ndarray) -> np.ndarray:
        return _column(self.mode, noise) + solve_banded((0, self.u), self.chol, noise)

    def _factor_times(self, d: np.ndarray) -> np.ndarray:
        rows = self.chol if d.ndim == 1 else self.chol[:, :, None]
        v = rows[self.u] * d
        for k in range(1, self.u + 1):
            v[:-k] += rows[self.u - k, k:] * d[k:]
        return v

    def logpdf(self, x: np.ndarray):
        v = self._factor_times(x - _column(self.mode, x))
        return -0.5 * len(self.mode) * LOG_2PI + self.half_log_det - 0.5 * np.sum(v**2, axis=0)

    def logpdf_from_noise(self, noise: np.ndarray):
        return -0.5 * len(self.mode) * LOG_2PI + self.half_log_det - 0.5 * np.sum(noise**2, axis=0)


def find_mode(
    target: StateSpaceTarget,
    start: Optional[np.ndarray] = None,
    max_iter: int = MAX_NEWTON_ITERATIONS,
    tol: float = 1e-8,
) -> GaussianApproximation:
    """Newton iterations with backtracking for the conditional mode of h."""
    h = np.full(target.n, target.p.mu_h) if start is None else np.array(start, dtype=float)
    f = target.log_target(h)
    if not np.isfinite(f):
        h = np.full(target.n, target.p.mu_h)
        f = target.log_target(h)

    grad = np.full(target.n, np.inf)
    for _ in range(max_iter):
        obs_grad, curvature = target.obs_derivatives(h)
        grad = obs_grad + target.prior_gradient(h)
        step = solveh_banded(target.prior_banded + curvature, grad)
        slope = float(grad @ step)
        t = 1.0
        while t > 1e-12:
            candidate = h + t * step
            value = target.log_target(candidate)
            if np.isfinite(value) and value >= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            # No ascent left at working precision.
            break
        h, f = candidate, value
        if np.max(np.abs(t * step)) < tol:
            break
    else:
        raise ModeSearchFailure(max_iter, float(np.max(np.abs(grad))))

    _, curvature = target.obs_derivatives(h)
    return GaussianApproximation(h, target.prior_banded + curvature)


def _generator(seed: Union[int, np.random.Generator, None]) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_states(
    spec: VolatilityModelSpec,
    params: SvParams,
    y: Union[Series, np.ndarray],
    current_h: Optional[np.ndarray],
    seed: Union[int, np.random.Generator, None],
    in_mean_scale: InMeanScale = "h",
) -> LatentPath:
    """
    One joint draw of h | y, theta.

    The proposal is the Gaussian approximation at the conditional mode; the draw is
    accepted with the independence Metropolis-Hastings probability. Without a current
    path the proposal is taken as is.
    """
    _check_family(spec)
    params.validate_for(spec)
    target = StateSpaceTarget(spec, params, _values(y), in_mean_scale)
    rng = _generator(seed)
    approx = find_mode(target, current_h)

    noise = rng.standard_normal(target.n)
    log_u = math.log(rng.random())
    proposal = approx.draw(noise)
    log_target_prop = float(target.log_target(proposal))
    weight_prop = log_target_prop - float(approx.logpdf_from_noise(noise))

    if current_h is None:
        h, log_target_value, accepted, prob = proposal, log_target_prop, True, 1.0
    else:
        current = np.asarray(current_h, dtype=float)
        log_target_cur = float(target.log_target(current))
        weight_cur = log_target_cur - float(approx.logpdf(current))
        log_alpha = weight_prop - weight_cur if np.isfinite(weight_prop) else -math.inf
        prob = math.exp(min(0.0, log_alpha))
        accepted = log_u < log_alpha
        h, log_target_value = (proposal, log_target_prop) if accepted else (current, log_target_cur)

    return LatentPath(
        h=h,
        loglik_at_path=float(target.obs_logpdf(h)),
        log_target=log_target_value,
        accepted=bool(accepted),
        acceptance_probability=prob,
    )


def sv_integrated_loglik(
    spec: VolatilityModelSpec,
    params: SvParams,
    y: Union[Series, np.ndarray],
    n_is_draws: int,
    seed: Union[int, np.random.Generator, None],
    in_mean_scale: InMeanScale = "h",
    mode_start: Optional[np.ndarray] = None,
) -> IntegratedLikelihood:
    """
    log p(y | theta) with h integrated out by importance sampling from the Gaussian
    approximation at the conditional mode.

    The numerical standard error is the delta-method standard error of the log of the
    mean weight.
    """
    _check_family(spec)
    params.validate_for(spec)
    if n_is_draws < 2:
        raise ValueError("need at least two importance draws")
    target = StateSpaceTarget(spec, params, _values(y), in_mean_scale)
    approx = find_mode(target, mode_start)
    noise = _generator(seed).standard_normal((target.n, n_is_draws))
    paths = approx.draw(noise)
    log_w = target.log_target(paths) - approx.logpdf_from_noise(noise)
    log_w = np.where(np.isfinite(log_w), log_w, -np.inf)
    if not np.any(np.isfinite(log_w)):
        raise DegenerateWeights(0.0, n_is_draws)

    value = float(logsumexp(log_w) - math.log(n_is_draws))
    w = np.exp(log_w - np.max(log_w))
    ess = float(w.sum() ** 2 / np.sum(w**2))
    if ess < MIN_ESS_FRACTION * n_is_draws:
        raise DegenerateWeights(ess, n_is_draws)
    nse = float(np.std(w, ddof=1) / (math.sqrt(n_is_draws) * np.mean(w)))
    return IntegratedLikelihood(value=value, nse=nse, ess=ess, n_draws=n_is_draws)


def starting_values(spec: VolatilityModelSpec, y: np.ndarray) -> np.ndarray:
    """Moment-based natural-scale starting point inside the support."""
    var = float(np.var(y))
    guess = {
        "mu": float(np.mean(y)),
        "mu_h": math.log(var),
        "phi": 0.9,
        "phi2": 0.0,
        "sigma_h": 0.3,
        "rho": 0.0,
        "psi": 0.0,
        "nu": 8.0,
        "lam": 0.0,
        "kappa": 0.02,
        "mu_j": 0.0,
        "sigma_j": math.sqrt(var),
    }
    return np.array([guess[name] for name in spec.param_names])


def _draw_state_level(
    rng: np.random.Generator, target: StateSpaceTarget, h: np.ndarray, prior_mean: float, prior_var: float
) -> float:
    ones = target.H @ np.ones(target.n)
    hh = target.H @ h
    precision = ones @ ones / target.state_var + 1.0 / prior_var
    mean = (ones @ hh / target.state_var + prior_mean / prior_var) / precision
    return float(mean + rng.standard_normal() / math.sqrt(precision))


def _draw_state_scale(
    rng: np.random.Generator, target: StateSpaceTarget, h: np.ndarray, shape: float, scale: float
) -> float:
    e = target.H @ (h - target.p.mu_h)
    post_shape = shape + 0.5 * target.n
    post_scale = scale + 0.5 * float(e @ e)
    return math.sqrt(post_scale / rng.gamma(post_shape))


def _run_sv_chain(spec, space, values, mcmc_config, rng, in_mean_scale, label):
    conjugate = conjugate_state_priors(space, spec)
    blocked = {"mu_h", "sigma_h"} if conjugate else set()
    rw_index = [i for i, name in enumerate(space.names) if name not in blocked]
    i_level, i_scale = space.index("mu_h"), space.index("sigma_h")

    x = starting_values(spec, values)
    z = space.from_natural(x)
    kernel = AdaptiveRandomWalk(0.01 * np.eye(len(rw_index)), rng, target=mcmc_config.target_acceptance)
    h: Optional[np.ndarray] = None

    n_keep = mcmc_config.n_draws
    total = mcmc_config.burn_in + n_keep * mcmc_config.thin
    draws = np.empty((n_keep, space.dim))
    paths: List[np.ndarray] = []
    state_accepted = 0
    kept = 0

    for it in range(total):
        if it == mcmc_config.burn_in:
            kernel.stop_adapting()
            state_accepted = 0

        params = params_from_vector(spec, x)
        path = sample_states(spec, params, values, h, rng, in_mean_scale)
        h = path.h
        state_accepted += int(path.accepted)

        if conjugate:
            level_prior, scale_prior = conjugate
            current = StateSpaceTarget(spec, params, values, in_mean_scale)
            x[i_level] = _draw_state_level(rng, current, h, level_prior.a, level_prior.b)
            current = StateSpaceTarget(spec, params_from_vector(spec, x), values, in_mean_scale)
            x[i_scale] = _draw_state_scale(rng, current, h, scale_prior.a, scale_prior.b)
            z = space.from_natural(x)

        def block_target(zb: np.ndarray, z=z, h=h) -> float:
            full = z.copy()
            full[rw_index] = zb
            xb = space.to_natural(full)
            log_prior = space.log_prior(xb)
            if not np.isfinite(log_prior):
                return -math.inf
            try:
                p = params_from_vector(spec, xb).validate_for(spec)
            except InvalidParams:
                return -math.inf
            value = float(StateSpaceTarget(spec, p, values, in_mean_scale).log_target(h))
            total_value = value + log_prior + space.log_jacobian(full)
            return total_value if np.isfinite(total_value) else -math.inf

        zb, _, _ = kernel.step(z[rw_index], block_target(z[rw_index]), block_target)
        z = z.copy()
        z[rw_index] = zb
        x = space.to_natural(z)

        done = it - mcmc_config.burn_in + 1
        if done > 0 and done % mcmc_config.thin == 0:
            draws[kept] = x
            if kept % mcmc_config.path_thin == 0:
                paths.append(h.copy())
            kept += 1

    rates = {
        "parameters": kernel.acceptance_rate,
        "states": state_accepted / max(1, n_keep * mcmc_config.thin),
    }
    logfire.debug("SV chain finished", label=label, **rates)
    return draws, paths, rates


def fit_sv_bayes(
    spec: VolatilityModelSpec,
    y: Union[Series, np.ndarray],
    prior_config: Optional[PriorConfig],
    mcmc_config: McmcConfig,
    in_mean_scale: InMeanScale = "h",
) -> PosteriorDraws:
    """
    Posterior draws by Metropolis-within-Gibbs.

    Each sweep draws the state path jointly, then mu_h and sigma_h from their
    normal and inverse-gamma conditionals when the priors allow it, then the remaining
    parameters with an adaptive random-walk block. Student-t and jump observation
    densities are used in marginal form, so no auxiliary indicators are sampled.
    Every ``path_thin``-th kept path is stored.
    """
    _check_family(spec)
    values = _values(y)
    if len(values) < MIN_OBSERVATIONS:
        raise TooShort(f"{spec.name} needs at least {MIN_OBSERVATIONS} observations, got {len(values)}")
    if np.ptp(values) == 0.0:
        raise ChainDivergence(f"{spec.name}: constant series, the volatility is not identified")

    space = build_space(spec, prior_config)
    chains, all_paths, acceptance = [], [], {}
    with logfire.span("fit_sv_bayes {model}", model=spec.name, nobs=len(values)):
        for i, rng in enumerate(spawn_generators(mcmc_config.seed, mcmc_config.chains)):
            draws, paths, rates = _run_sv_chain(
                spec, space, values, mcmc_config, rng, in_mean_scale, f"{spec.name}[{i}]"
            )
            if rates["parameters"] < mcmc_config.min_acceptance:
                raise ChainDivergence(
                    f"{spec.name} chain {i}: acceptance rate {rates['parameters']:.4f} after adaptation"
                )
            chains.append(draws)
            all_paths.extend(paths)
            acceptance[f"parameters[{i}]"] = rates["parameters"]
            acceptance[f"states[{i}]"] = rates["states"]

        rhat = gelman_rubin(chains)
        logfire.info("SV fit complete", model=spec.name, acceptance=acceptance)

    return PosteriorDraws(
        spec=spec,
        names=space.names,
        draws=np.vstack(chains),
        chain=np.repeat(np.arange(len(chains)), mcmc_config.n_draws),
        acceptance_rates=acceptance,
        rhat=dict(zip(space.names, rhat.tolist())),
        seed=mcmc_config.seed,
        data_fingerprint=data_fingerprint(values),
        paths=np.vstack(all_paths),
        timestamps=y.timestamps if isinstance(y, Series) else None,
    )


def simulate_sv_paths(
    spec: VolatilityModelSpec,
    params: SvParams,
    n: int,
    seed: int,
    in_mean_scale: InMeanScale = "h",
) -> Tuple[np.ndarray, np.ndarray]:
    """Simulated returns and their log-variance path."""
    _check_family(spec)
    p = params.validate_for(spec, allow_zero_scale=True)
    rng = np.random.default_rng(seed)
    # Fixed draw order keeps paths comparable across feature toggles at one seed.
    z = rng.standard_normal(n)
    eta = rng.standard_normal(n + 1)
    u = rng.random(n)
    size = rng.standard_normal(n)
    if spec.has(Feature.STUDENT_T):
        z = z * np.sqrt((p.nu - 2.0) / rng.chisquare(p.nu, n))

    phi2 = p.phi2 if spec.variance_lags == 2 else 0.0
    dev = np.empty(n)
    if spec.variance_lags == 2:
        start = p.sigma_h * _stationary_start(p.phi, phi2) @ eta[:2]
        dev[: min(2, n)] = start[: min(2, n)]
        first = 2
    else:
        dev[0] = p.sigma_h / math.sqrt(1.0 - p.phi**2) * eta[0]
        first = 1
    for t in range(first, n):
        dev[t] = p.phi * dev[t - 1] + (phi2 * dev[t - 2] if t >= 2 else 0.0) + p.sigma_h * eta[t]
    h = p.mu_h + dev

    rho = p.rho if spec.has(Feature.LEVERAGE) else 0.0
    eps = np.exp(0.5 * h) * (rho * eta[1:] + math.sqrt(1.0 - rho**2) * z)
    jumps = (u < p.kappa) * (p.mu_j + p.sigma_j * size)
    lam = p.lam if spec.has(Feature.IN_MEAN) else 0.0
    driver = h if in_mean_scale == "h" else np.exp(h)
    psi = p.psi if spec.has(Feature.MA1) else 0.0
    lagged = np.concatenate([[0.0], eps[:-1]])
    y = p.mu + lam * driver + eps + psi * lagged + jumps
    return y, h


def simulate_sv(
    spec: VolatilityModelSpec,
    params: SvParams,
    n: int,
    seed: int,
    in_mean_scale: InMeanScale = "h",
    start: str = "1900-01",
) -> Series:
    """Forward simulation of an SV model from its stationary state distribution."""
    y, _ = simulate_sv_paths(spec, params, n, seed, in_mean_scale)
    return Series.from_array(f"{spec.name}_sim", y, start=start)


def extract_volatility(fit: PosteriorDraws) -> Series:
    """Posterior mean of exp(h_t / 2), the conditional standard deviation."""
    if fit.paths is None or len(fit.paths) == 0:
        raise EmptyFit(f"{fit.spec.name} fit stores no latent paths")
    vol = np.mean(np.exp(0.5 * fit.paths), axis=0)
    name = f"{fit.spec.name}_vol"
    if fit.timestamps is not None:
        return Series(name=name, timestamps=fit.timestamps, values=vol)
    return Series.from_array(name, vol)
