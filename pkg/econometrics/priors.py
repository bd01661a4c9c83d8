"""
Priors and unconstrained reparameterisation of the volatility models.

Every sampler and the marginal-likelihood estimator work on an unconstrained vector z.
A ParameterSpace maps z to the natural parameters of a VolatilityModelSpec and supplies
the log prior and the log Jacobian of that map, so that

    log p(z) = log p(x(z)) + log |dx/dz|.

Most parameters are scalar components with their own prior. Two groups are mapped
jointly because their constraint couples them:

* GARCH variance coefficients live on the covariance-stationarity simplex
  alpha1 + beta1 (+ beta2) (+ gamma / 2) < 1. By default they are independent
  normals truncated to that region; a uniform prior on it is the alternative.
* SV-2 autoregressive coefficients are parameterised by partial autocorrelations,
  which covers the AR(2) stationarity triangle exactly, with a uniform prior on them.
"""

import math
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, stats
from scipy.special import expit, gammaln, logit, logsumexp

from econometrics.errors import ConfigError
from models.volatility import (
    Family,
    Feature,
    PersistencePrior,
    PriorConfig,
    PriorKind,
    ScalarPrior,
    VolatilityModelSpec,
)

# Weights of each coefficient in the stationarity constraint.
PERSISTENCE_WEIGHTS = {"alpha1": 1.0, "beta1": 1.0, "beta2": 1.0, "gamma": 0.5}
# Means of the truncated normal persistence prior.
PERSISTENCE_MEANS = {"alpha1": 0.1, "beta1": 0.8, "beta2": 0.0, "gamma": 0.0}

DEFAULT_PRIORS: Dict[str, ScalarPrior] = {
    "mu": ScalarPrior(kind=PriorKind.NORMAL, a=0.0, b=100.0),
    "lam": ScalarPrior(kind=PriorKind.NORMAL, a=0.0, b=100.0),
    "mu_j": ScalarPrior(kind=PriorKind.NORMAL, a=0.0, b=100.0),
    "alpha0": ScalarPrior(kind=PriorKind.TRUNCATED_NORMAL, a=1.0, b=10.0, lower=0.0),
    "nu": ScalarPrior(kind=PriorKind.SHIFTED_GAMMA, a=2.0, b=0.1, lower=2.0),
    "kappa": ScalarPrior(kind=PriorKind.UNIFORM, lower=0.0, upper=0.1),
    "psi": ScalarPrior(kind=PriorKind.UNIFORM, lower=-1.0, upper=1.0),
    "rho": ScalarPrior(kind=PriorKind.UNIFORM, lower=-1.0, upper=1.0),
    "sigma_j": ScalarPrior(kind=PriorKind.INV_GAMMA_SQUARE, a=3.0, b=50.0, lower=0.0),
    "mu_h": ScalarPrior(kind=PriorKind.NORMAL, a=0.0, b=10.0),
    "phi": ScalarPrior(kind=PriorKind.SCALED_BETA, a=20.0, b=1.5, lower=-1.0, upper=1.0),
    "sigma_h": ScalarPrior(kind=PriorKind.INV_GAMMA_SQUARE, a=5.0, b=0.2, lower=0.0),
}


class Support(str, Enum):
    REAL = "real"
    POSITIVE = "positive"
    INTERVAL = "interval"


def _support(prior: ScalarPrior) -> Tuple[Support, float, float]:
    if prior.kind == PriorKind.NORMAL:
        return Support.REAL, -math.inf, math.inf
    lower = 0.0 if prior.lower is None else float(prior.lower)
    if prior.kind in (PriorKind.UNIFORM, PriorKind.SCALED_BETA):
        return Support.INTERVAL, lower, float(prior.upper)
    if prior.kind == PriorKind.TRUNCATED_NORMAL and prior.upper is not None:
        return Support.INTERVAL, lower, float(prior.upper)
    if prior.kind == PriorKind.INV_GAMMA_SQUARE and lower != 0.0:
        raise ConfigError("inv_gamma_square prior must have lower bound 0")
    return Support.POSITIVE, lower, math.inf


def _frozen(prior: ScalarPrior):
    lower = 0.0 if prior.lower is None else prior.lower
    if prior.kind == PriorKind.NORMAL:
        return stats.norm(loc=prior.a, scale=math.sqrt(prior.b))
    if prior.kind == PriorKind.HALF_NORMAL:
        return stats.halfnorm(loc=lower, scale=math.sqrt(prior.b))
    if prior.kind == PriorKind.TRUNCATED_NORMAL:
        sd = math.sqrt(prior.b)
        upper = math.inf if prior.upper is None else prior.upper
        return stats.truncnorm((lower - prior.a) / sd, (upper - prior.a) / sd, loc=prior.a, scale=sd)
    if prior.kind == PriorKind.SHIFTED_GAMMA:
        return stats.gamma(prior.a, loc=lower, scale=1.0 / prior.b)
    if prior.kind == PriorKind.UNIFORM:
        return stats.uniform(loc=prior.lower, scale=prior.upper - prior.lower)
    if prior.kind == PriorKind.SCALED_BETA:
        return stats.beta(prior.a, prior.b, loc=prior.lower, scale=prior.upper - prior.lower)
    return stats.invgamma(prior.a, scale=prior.b)


def prior_logpdf(prior: ScalarPrior, x, dist=None):
    """Log prior density at natural-scale values ``x``."""
    x = np.asarray(x, dtype=float)
    dist = _frozen(prior) if dist is None else dist
    if prior.kind == PriorKind.INV_GAMMA_SQUARE:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = dist.logpdf(x**2) + np.log(2.0 * x)
        return np.where(x > 0.0, out, -np.inf)
    return dist.logpdf(x)


class ScalarComponent:
    """One parameter with its own prior and a one-dimensional transform."""

    def __init__(self, name: str, prior: ScalarPrior) -> None:
        self.names = [name]
        self.prior = prior
        self.support, self.lower, self.upper = _support(prior)
        self._dist = _frozen(prior)

    @property
    def dim(self) -> int:
        return 1

    def to_natural(self, z: np.ndarray) -> np.ndarray:
        z = z[:, 0]
        if self.support == Support.REAL:
            x = z
        elif self.support == Support.POSITIVE:
            x = self.lower + np.exp(z)
        else:
            x = self.lower + (self.upper - self.lower) * expit(z)
        return x[:, None]

    def from_natural(self, x: np.ndarray) -> np.ndarray:
        x = x[:, 0]
        if self.support == Support.REAL:
            z = x
        elif self.support == Support.POSITIVE:
            z = np.log(x - self.lower)
        else:
            z = logit((x - self.lower) / (self.upper - self.lower))
        return z[:, None]

    def log_jacobian(self, z: np.ndarray) -> np.ndarray:
        z = z[:, 0]
        if self.support == Support.REAL:
            return np.zeros_like(z)
        if self.support == Support.POSITIVE:
            return z.copy()
        return math.log(self.upper - self.lower) - np.logaddexp(0.0, z) - np.logaddexp(0.0, -z)

    def log_prior(self, x: np.ndarray) -> np.ndarray:
        return prior_logpdf(self.prior, x[:, 0], self._dist)


class SimplexComponent:
    """
    Nonnegative coefficients with sum_i c_i x_i < 1 under a uniform prior.

    The additive logistic map z -> s = softmax(0, z) followed by x_i = s_i / c_i covers
    the region exactly; the region has volume 1 / (k! prod c_i).
    """

    def __init__(self, names: Sequence[str], weights: Sequence[float]) -> None:
        self.names = list(names)
        self.weights = np.asarray(weights, dtype=float)
        self._log_volume = -gammaln(len(self.names) + 1.0) - float(np.sum(np.log(self.weights)))

    @property
    def dim(self) -> int:
        return len(self.names)

    def _log_shares(self, z: np.ndarray) -> np.ndarray:
        full = np.concatenate([np.zeros((z.shape[0], 1)), z], axis=1)
        return full - logsumexp(full, axis=1, keepdims=True)

    def to_natural(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self._log_shares(z)[:, 1:]) / self.weights

    def from_natural(self, x: np.ndarray) -> np.ndarray:
        shares = x * self.weights
        slack = 1.0 - shares.sum(axis=1, keepdims=True)
        return np.log(shares) - np.log(slack)

    def log_jacobian(self, z: np.ndarray) -> np.ndarray:
        return self._log_shares(z).sum(axis=1) - float(np.sum(np.log(self.weights)))

    def log_prior(self, x: np.ndarray) -> np.ndarray:
        inside = np.all(x >= 0.0, axis=1) & ((x * self.weights).sum(axis=1) < 1.0)
        return np.where(inside, -self._log_volume, -np.inf)


class TruncatedNormalSimplexComponent(SimplexComponent):
    """
    Independent normals on the coefficients, truncated to sum_i c_i x_i < 1, x >= 0.

    Shares the additive logistic map of SimplexComponent. The normalising constant is
    the normal mass of the region; the last coordinate is integrated in closed form
    and the others by adaptive quadrature.
    """

    def __init__(
        self,
        names: Sequence[str],
        weights: Sequence[float],
        means: Sequence[float],
        variance: float,
    ) -> None:
        super().__init__(names, weights)
        self.means = np.asarray(means, dtype=float)
        self.sd = math.sqrt(variance)
        self._log_mass = math.log(self._mass())

    def _mass(self) -> float:
        c, m, sd = self.weights, self.means, self.sd
        last = self.dim - 1

        def last_mass(slack: float) -> float:
            upper = max(slack, 0.0) / c[last]
            return stats.norm.cdf(upper, m[last], sd) - stats.norm.cdf(0.0, m[last], sd)

        if last == 0:
            return float(last_mass(1.0))

        def integrand(*xs: float) -> float:
            x = np.asarray(xs)
            slack = 1.0 - float(c[:last] @ x)
            return float(np.prod(stats.norm.pdf(x, m[:last], sd))) * last_mass(slack)

        # nquad passes the outer coordinates x_{j+1}, ..., x_{last-1} to range j.
        def bounds(j: int):
            def limits(*outer: float) -> Tuple[float, float]:
                slack = 1.0 - float(c[j + 1 : last] @ np.asarray(outer))
                return 0.0, max(slack, 0.0) / c[j]

            return limits

        mass, _ = integrate.nquad(integrand, [bounds(j) for j in range(last)], opts={"epsabs": 1e-11})
        return float(mass)

    def log_prior(self, x: np.ndarray) -> np.ndarray:
        inside = np.all(x >= 0.0, axis=1) & ((x * self.weights).sum(axis=1) < 1.0)
        log_pdf = stats.norm.logpdf(x, self.means, self.sd).sum(axis=1) - self._log_mass
        return np.where(inside, log_pdf, -np.inf)


class Ar2Component:
    """AR(2) coefficients through partial autocorrelations r = tanh(z), uniform on r."""

    def __init__(self, names: Sequence[str]) -> None:
        self.names = list(names)

    @property
    def dim(self) -> int:
        return 2

    def to_natural(self, z: np.ndarray) -> np.ndarray:
        r = np.tanh(z)
        return np.column_stack([r[:, 0] * (1.0 - r[:, 1]), r[:, 1]])

    def from_natural(self, x: np.ndarray) -> np.ndarray:
        r2 = x[:, 1]
        r1 = x[:, 0] / (1.0 - r2)
        return np.arctanh(np.column_stack([r1, r2]))

    def log_jacobian(self, z: np.ndarray) -> np.ndarray:
        r = np.tanh(z)
        return np.log1p(-r[:, 1]) + np.log1p(-r[:, 0] ** 2) + np.log1p(-r[:, 1] ** 2)

    def log_prior(self, x: np.ndarray) -> np.ndarray:
        phi1, phi2 = x[:, 0], x[:, 1]
        inside = (np.abs(phi2) < 1.0) & (phi1 + phi2 < 1.0) & (phi2 - phi1 < 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -math.log(4.0) - np.log1p(-phi2)
        return np.where(inside, out, -np.inf)


class ParameterSpace:
    """
    Ordered collection of components covering a model's parameters.

    Methods accept a single vector or a stack of vectors (one per row) and return
    scalars or arrays to match.
    """

    def __init__(self, components: Sequence) -> None:
        self.components = list(components)
        self.names: List[str] = [n for c in self.components for n in c.names]
        self._slices = []
        start = 0
        for c in self.components:
            self._slices.append(slice(start, start + c.dim))
            start += c.dim

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def component_of(self, name: str):
        for c in self.components:
            if name in c.names:
                return c
        raise KeyError(name)

    @staticmethod
    def _stack(v) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(v, dtype=float)
        return (arr[None, :], True) if arr.ndim == 1 else (arr, False)

    def _map(self, v, method: str) -> np.ndarray:
        arr, single = self._stack(v)
        out = np.empty_like(arr)
        for c, sl in zip(self.components, self._slices):
            out[:, sl] = getattr(c, method)(arr[:, sl])
        return out[0] if single else out

    def _sum(self, v, method: str):
        arr, single = self._stack(v)
        total = np.zeros(arr.shape[0])
        for c, sl in zip(self.components, self._slices):
            total = total + getattr(c, method)(arr[:, sl])
        return float(total[0]) if single else total

    def to_natural(self, z):
        return self._map(z, "to_natural")

    def from_natural(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._map(x, "from_natural")

    def log_jacobian(self, z):
        return self._sum(z, "log_jacobian")

    def log_prior(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._sum(x, "log_prior")

    def log_density_z(self, z):
        """Log prior of the unconstrained vector, Jacobian included."""
        prior = self.log_prior(self.to_natural(z))
        return prior + self.log_jacobian(z)


def _persistence_component(names: List[str], prior_config: PriorConfig) -> SimplexComponent:
    weights = [PERSISTENCE_WEIGHTS[n] for n in names]
    if prior_config.persistence == PersistencePrior.UNIFORM:
        return SimplexComponent(names, weights)
    means = [PERSISTENCE_MEANS[n] for n in names]
    return TruncatedNormalSimplexComponent(names, weights, means, prior_config.persistence_variance)


def build_space(spec: VolatilityModelSpec, prior_config: Optional[PriorConfig] = None) -> ParameterSpace:
    """Assemble the parameter space of ``spec`` in ``spec.param_names`` order."""
    prior_config = prior_config if prior_config is not None else PriorConfig()
    overrides = prior_config.overrides
    names = spec.param_names
    unknown = set(overrides) - set(names) - set(DEFAULT_PRIORS)
    if unknown:
        raise ConfigError(f"prior overrides name unknown parameters: {sorted(unknown)}")

    joint = [n for n in names if n in PERSISTENCE_WEIGHTS] if spec.family == Family.GARCH else []
    if spec.family == Family.SV and spec.variance_lags == 2:
        joint = ["phi", "phi2"]
    fixed = [n for n in joint if n in overrides]
    if fixed:
        raise ConfigError(f"{spec.name}: {fixed} have a joint prior and cannot be overridden")

    components = []
    for name in names:
        if name in joint:
            if name != joint[0]:
                continue
            if spec.family == Family.GARCH:
                components.append(_persistence_component(joint, prior_config))
            else:
                components.append(Ar2Component(joint))
            continue
        components.append(ScalarComponent(name, overrides.get(name, DEFAULT_PRIORS[name])))
    space = ParameterSpace(components)
    return space


def conjugate_state_priors(space: ParameterSpace, spec: VolatilityModelSpec) -> Optional[Tuple[ScalarPrior, ScalarPrior]]:
    """
    Priors of (mu_h, sigma_h) when the SV state block can be drawn conjugately.

    That needs a normal prior on mu_h, an inverse-gamma prior on sigma_h squared and no
    leverage, since leverage ties the state innovations to the observation errors.
    """
    if spec.family != Family.SV or spec.has(Feature.LEVERAGE):
        return None
    level = space.component_of("mu_h")
    scale = space.component_of("sigma_h")
    if level.prior.kind == PriorKind.NORMAL and scale.prior.kind == PriorKind.INV_GAMMA_SQUARE:
        return level.prior, scale.prior
    return None
