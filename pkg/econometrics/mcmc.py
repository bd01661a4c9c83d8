"""
Adaptive random-walk Metropolis and chain diagnostics.

The proposal is Gaussian with covariance (2.38^2 / d) (Sigma + eps I), where Sigma starts
at a supplied approximation of the posterior covariance and is replaced by the running
covariance of the chain once enough history exists. A Robbins-Monro recursion on the log
of an extra scale factor steers the acceptance rate toward its target. All adaptation
happens during burn-in only, so kept draws come from a fixed Markov kernel.
"""

import math
from typing import Callable, List, Optional, Sequence

import logfire
import numpy as np
from pydantic import BaseModel, ConfigDict, Field

LogTarget = Callable[[np.ndarray], float]

OPTIMAL_SCALE = 2.38**2


class ChainResult(BaseModel):
    """Kept draws of one chain."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    draws: np.ndarray = Field(description="n_keep x d")
    log_target: np.ndarray
    acceptance_rate: float = Field(description="Post burn-in acceptance rate")


class AdaptiveRandomWalk:
    """
    Random-walk Metropolis kernel with Haario-style covariance learning.

    Args:
        initial_cov: Proposal shape used until the chain has its own history.
        rng: Generator consumed by this kernel only.
        target: Acceptance rate the scale adaptation aims for.
        eps: Ridge added to the running covariance.
    """

    def __init__(
        self,
        initial_cov: np.ndarray,
        rng: np.random.Generator,
        target: float = 0.234,
        eps: float = 1e-8,
        update_every: int = 10,
    ) -> None:
        self.initial_cov = np.atleast_2d(np.asarray(initial_cov, dtype=float))
        self.dim = self.initial_cov.shape[0]
        self.rng = rng
        self.target = target
        self.eps = eps
        self.update_every = update_every
        self.adapting = True
        self.log_scale = 0.0
        self._t = 0
        self._mean = np.zeros(self.dim)
        self._m2 = np.zeros((self.dim, self.dim))
        self._chol = self._factor(self.initial_cov)
        self.n_proposed = 0
        self.n_accepted = 0

    def _factor(self, cov: np.ndarray) -> np.ndarray:
        scaled = OPTIMAL_SCALE / self.dim * (cov + self.eps * np.eye(self.dim))
        try:
            return np.linalg.cholesky(scaled)
        except np.linalg.LinAlgError:
            return np.diag(np.sqrt(np.maximum(np.diag(scaled), self.eps)))

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else math.nan

    def stop_adapting(self) -> None:
        """Freeze the kernel and restart the acceptance counters."""
        self.adapting = False
        self.n_proposed = 0
        self.n_accepted = 0

    def step(self, x: np.ndarray, log_p: float, log_target: LogTarget):
        """One Metropolis step; returns (state, log target, accepted)."""
        noise = self.rng.standard_normal(self.dim)
        log_u = math.log(self.rng.random())
        proposal = x + math.exp(self.log_scale) * (self._chol @ noise)
        log_q = log_target(proposal)
        log_alpha = log_q - log_p if np.isfinite(log_q) else -math.inf
        accepted = log_u < log_alpha
        if accepted:
            x, log_p = proposal, log_q
        self.n_proposed += 1
        self.n_accepted += int(accepted)
        if self.adapting:
            self._adapt(x, math.exp(min(0.0, log_alpha)))
        return x, log_p, accepted

    def _adapt(self, x: np.ndarray, alpha: float) -> None:
        self._t += 1
        gain = (self._t + 1) ** -0.6
        self.log_scale += gain * (alpha - self.target)
        delta = x - self._mean
        self._mean += delta / self._t
        self._m2 += np.outer(delta, x - self._mean)
        if self._t >= max(20, 2 * self.dim) and self._t % self.update_every == 0:
            self._chol = self._factor(self._m2 / (self._t - 1))


def run_chain(
    log_target: LogTarget,
    x0: np.ndarray,
    n_keep: int,
    burn_in: int,
    thin: int,
    initial_cov: np.ndarray,
    rng: np.random.Generator,
    target: float = 0.234,
    label: str = "chain",
) -> ChainResult:
    """Run one adaptive chain and keep every ``thin``-th post burn-in state."""
    kernel = AdaptiveRandomWalk(initial_cov, rng, target=target)
    x = np.asarray(x0, dtype=float).copy()
    log_p = log_target(x)
    if not np.isfinite(log_p):
        raise ValueError(f"{label}: starting point has zero posterior density")

    for _ in range(burn_in):
        x, log_p, _ = kernel.step(x, log_p, log_target)
    kernel.stop_adapting()

    draws = np.empty((n_keep, kernel.dim))
    values = np.empty(n_keep)
    for i in range(n_keep):
        for _ in range(thin):
            x, log_p, _ = kernel.step(x, log_p, log_target)
        draws[i] = x
        values[i] = log_p

    logfire.debug(
        "Chain finished",
        label=label,
        kept=n_keep,
        acceptance_rate=kernel.acceptance_rate,
        log_scale=kernel.log_scale,
    )
    return ChainResult(draws=draws, log_target=values, acceptance_rate=kernel.acceptance_rate)


def gelman_rubin(chains: Sequence[np.ndarray]) -> np.ndarray:
    """
    Potential scale reduction factor per column.

    A single chain is split into halves. Columns with no within-chain variation
    return NaN.
    """
    arrays: List[np.ndarray] = [np.atleast_2d(np.asarray(c, dtype=float)) for c in chains]
    if len(arrays) == 1:
        half = arrays[0].shape[0] // 2
        arrays = [arrays[0][:half], arrays[0][half : 2 * half]]
    n = min(a.shape[0] for a in arrays)
    stacked = np.stack([a[:n] for a in arrays])
    if n < 2:
        raise ValueError("need at least two draws per chain")
    means = stacked.mean(axis=1)
    within = stacked.var(axis=1, ddof=1).mean(axis=0)
    between = n * means.var(axis=0, ddof=1)
    pooled = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(pooled / within)
    return np.where(within > 0.0, rhat, np.nan)


def spawn_generators(seed: int, n: int) -> List[np.random.Generator]:
    """Independent generators, one per chain."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def proposal_covariance(hess_inv: Optional[np.ndarray], dim: int, fallback: float = 0.01) -> np.ndarray:
    """Posterior covariance guess from an optimiser, or a small diagonal if unusable."""
    if hess_inv is not None:
        cov = 0.5 * (np.asarray(hess_inv) + np.asarray(hess_inv).T)
        if np.all(np.isfinite(cov)) and np.all(np.linalg.eigvalsh(cov) > 0.0):
            return cov
    return fallback * np.eye(dim)
