"""
Marginal likelihoods, Bayes factors and model rankings.

The marginal likelihood p(y) is estimated by importance sampling on the unconstrained
parameter scale. The importance density is a Gaussian fitted to the transformed
posterior draws by moment matching, which is the cross-entropy optimum within the
Gaussian family. For SV models p(y | theta) is itself an importance-sampling estimate,
and its numerical error is carried into the outer standard error to first order.
"""

import math
from typing import Callable, Iterable, Optional, Tuple, Union

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import logsumexp

from econometrics.errors import DataMismatch, DegenerateWeights, EmptyEstimates, ModeSearchFailure
from econometrics.garch import VarianceInit, garch_loglik
from econometrics.priors import ParameterSpace, build_space
from econometrics.sv import InMeanScale, sv_integrated_loglik
from models.schema import Series
from models.volatility import (
    Family,
    MarginalLikelihoodEstimate,
    PosteriorDraws,
    PriorConfig,
    RankingRow,
    RankingTable,
    data_fingerprint,
    params_from_vector,
)

MIN_POSTERIOR_DRAWS = 1000
MIN_ESS_FRACTION = 0.01

# Natural-scale parameters and an integer seed in; log-likelihood and its nse out.
LoglikFn = Callable[[np.ndarray, int], Tuple[float, float]]


class GaussianProposal(BaseModel):
    """Gaussian importance density on the unconstrained scale."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mean: np.ndarray
    cov: np.ndarray

    @classmethod
    def fit(cls, z: np.ndarray, full_cov: bool = False, inflate: float = 1.0) -> "GaussianProposal":
        """Moment-match the draws; independent components unless ``full_cov``."""
        z = np.atleast_2d(z)
        mean = z.mean(axis=0)
        if full_cov:
            cov = np.atleast_2d(np.cov(z, rowvar=False))
        else:
            cov = np.diag(z.var(axis=0, ddof=1))
        return cls(mean=mean, cov=inflate * cov)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        chol = np.linalg.cholesky(self.cov)
        return self.mean + rng.standard_normal((n, len(self.mean))) @ chol.T

    def logpdf(self, z: np.ndarray) -> np.ndarray:
        chol = np.linalg.cholesky(self.cov)
        dev = np.linalg.solve(chol, (np.atleast_2d(z) - self.mean).T)
        d = len(self.mean)
        half_log_det = float(np.sum(np.log(np.diag(chol))))
        return -0.5 * d * math.log(2.0 * math.pi) - half_log_det - 0.5 * np.sum(dev**2, axis=0)


class ImportanceSamplingResult(BaseModel):
    log_ml: float
    nse: float
    ess: float
    n_draws: int
    n_failed: int = 0


def importance_sampling_log_ml(
    space: ParameterSpace,
    loglik_fn: LoglikFn,
    posterior_z: np.ndarray,
    n_is_draws: int,
    seed: int,
    full_cov: bool = False,
    proposal: Optional[GaussianProposal] = None,
) -> ImportanceSamplingResult:
    """
    log p(y) by importance sampling with a posterior-fitted Gaussian on the z scale.

    Draws whose likelihood cannot be evaluated get zero weight and are counted in
    ``n_failed``.
    """
    if n_is_draws < 2:
        raise ValueError("need at least two importance draws")
    proposal_seq, inner_seq = np.random.SeedSequence(seed).spawn(2)
    if proposal is None:
        proposal = GaussianProposal.fit(posterior_z, full_cov=full_cov)
    z = proposal.draw(np.random.default_rng(proposal_seq), n_is_draws)
    inner_seeds = inner_seq.generate_state(n_is_draws)

    log_prior = np.atleast_1d(space.log_density_z(z))
    log_q = proposal.logpdf(z)
    x = space.to_natural(z)
    loglik = np.full(n_is_draws, -np.inf)
    inner_nse = np.zeros(n_is_draws)
    failed = 0
    for i in range(n_is_draws):
        if not np.isfinite(log_prior[i]):
            continue
        try:
            loglik[i], inner_nse[i] = loglik_fn(x[i], int(inner_seeds[i]))
        except (DegenerateWeights, ModeSearchFailure):
            failed += 1

    log_w = loglik + log_prior - log_q
    log_w = np.where(np.isfinite(log_w), log_w, -np.inf)
    if not np.any(np.isfinite(log_w)):
        raise DegenerateWeights(0.0, n_is_draws)

    log_ml = float(logsumexp(log_w) - math.log(n_is_draws))
    w = np.exp(log_w - np.max(log_w))
    ess = float(w.sum() ** 2 / np.sum(w**2))
    if ess < MIN_ESS_FRACTION * n_is_draws:
        raise DegenerateWeights(ess, n_is_draws)
    outer = float(np.std(w, ddof=1) / (math.sqrt(n_is_draws) * np.mean(w)))
    share = w / w.sum()
    inner = float(np.sqrt(np.sum(share**2 * inner_nse**2)))
    if failed:
        logfire.warn("Importance draws without a likelihood", failed=failed, n_draws=n_is_draws)
    return ImportanceSamplingResult(
        log_ml=log_ml,
        nse=math.sqrt(outer**2 + inner**2),
        ess=ess,
        n_draws=n_is_draws,
        n_failed=failed,
    )


def _values(y: Union[Series, np.ndarray]) -> np.ndarray:
    return np.asarray(y.values if isinstance(y, Series) else y, dtype=float)


def marginal_likelihood(
    fit: PosteriorDraws,
    y: Union[Series, np.ndarray],
    n_is_draws: int,
    seed: int,
    prior_config: Optional[PriorConfig] = None,
    n_inner_draws: int = 50,
    full_cov: bool = False,
    proposal_rows: Optional[slice] = None,
    in_mean_scale: InMeanScale = "h",
    variance_init: VarianceInit = "unconditional",
) -> MarginalLikelihoodEstimate:
    """
    Log marginal likelihood of a fitted model.

    GARCH likelihoods are exact; SV likelihoods integrate the state path out with
    ``n_inner_draws`` importance draws each. ``proposal_rows`` restricts the draws used
    to fit the importance density.
    """
    spec = fit.spec
    values = _values(y)
    fingerprint = data_fingerprint(values)
    if fingerprint != fit.data_fingerprint:
        raise DataMismatch(f"{spec.name} was fitted on different data")
    if fit.n_draws < MIN_POSTERIOR_DRAWS:
        raise ValueError(f"{spec.name}: need at least {MIN_POSTERIOR_DRAWS} posterior draws, got {fit.n_draws}")

    space = build_space(spec, prior_config)
    draws = fit.draws if proposal_rows is None else fit.draws[proposal_rows]
    posterior_z = space.from_natural(draws)
    posterior_z = posterior_z[np.all(np.isfinite(posterior_z), axis=1)]

    if spec.family == Family.GARCH:

        def loglik_fn(x: np.ndarray, _: int) -> Tuple[float, float]:
            params = params_from_vector(spec, x)
            return garch_loglik(spec, params, values, variance_init, quiet=True), 0.0

    else:
        mode_start = fit.paths.mean(axis=0) if fit.paths is not None else None

        def loglik_fn(x: np.ndarray, inner_seed: int) -> Tuple[float, float]:
            params = params_from_vector(spec, x)
            est = sv_integrated_loglik(
                spec, params, values, n_inner_draws, inner_seed, in_mean_scale, mode_start
            )
            return est.value, est.nse

    with logfire.span("marginal_likelihood {model}", model=spec.name, n_is_draws=n_is_draws):
        result = importance_sampling_log_ml(space, loglik_fn, posterior_z, n_is_draws, seed, full_cov)
        logfire.info(
            "Marginal likelihood estimated",
            model=spec.name,
            log_ml=result.log_ml,
            nse=result.nse,
            ess=result.ess,
        )
    return MarginalLikelihoodEstimate(
        spec=spec,
        log_ml=result.log_ml,
        nse=result.nse,
        n_is_draws=n_is_draws,
        ess=result.ess,
        data_fingerprint=fingerprint,
    )


def bayes_factor(a: MarginalLikelihoodEstimate, b: MarginalLikelihoodEstimate) -> float:
    """log Bayes factor of model ``a`` against model ``b``."""
    if a.data_fingerprint != b.data_fingerprint:
        raise DataMismatch(f"{a.spec.name} and {b.spec.name} were estimated on different data")
    return a.log_ml - b.log_ml


def ranking_table(
    estimates: Iterable[MarginalLikelihoodEstimate], series: Optional[str] = None
) -> RankingTable:
    """Models sorted by log marginal likelihood, ties broken by model name."""
    estimates = list(estimates)
    if len(estimates) < 2:
        raise EmptyEstimates(f"ranking needs at least two estimates, got {len(estimates)}")
    fingerprints = {e.data_fingerprint for e in estimates}
    if len(fingerprints) > 1:
        raise DataMismatch("estimates in one ranking must share their data")
    ordered = sorted(estimates, key=lambda e: (-e.log_ml, e.spec.name))
    best = ordered[0]
    rows = [
        RankingRow(
            rank=i + 1,
            model=e.spec.name,
            log_ml=e.log_ml,
            nse=e.nse,
            log_bf_vs_best=bayes_factor(e, best),
        )
        for i, e in enumerate(ordered)
    ]
    return RankingTable(series=series, rows=rows)
