"""
BDS test for serial independence.

Correlation integrals use the sup-norm on m-histories with a strict ``< eps``
threshold. The statistic conditions on the first m-1 observations, which are needed
to form the m-histories, and uses the Brock-Dechert-Scheinkman-LeBaron variance.
"""

from typing import Dict, Iterable, Sequence, Tuple

import logfire
import numpy as np
from scipy import stats

from econometrics.errors import DegenerateEpsilon, TooShort
from econometrics.var_granger import fit_var
from models.schema import BdsDimension, BdsResult, EpsilonRule, Series

MIN_BDS_OBS = 50


def distance_indicators(x: np.ndarray, eps: float) -> np.ndarray:
    """Pairwise indicators |x_i - x_j| < eps as a boolean matrix."""
    x = np.asarray(x, dtype=float)
    return np.abs(x[:, None] - x[None, :]) < eps


def _correlation_sum(indicators: np.ndarray, m: int) -> float:
    joint = indicators
    for _ in range(1, m):
        joint = joint[1:, 1:] & joint[:-1, :-1]
    n = len(joint)
    if n < 2:
        return float("nan")
    pairs = n * (n - 1) // 2
    return int(np.count_nonzero(np.triu(joint, 1))) / pairs


def correlation_integral(s: Series, m: int, eps: float) -> float:
    """
    Share of pairs of m-histories within sup-norm distance ``eps``.

    Args:
        s: Observations.
        m: Embedding dimension, at least 1.
        eps: Proximity threshold, strictly positive.

    Returns:
        C_m(eps) in [0, 1].
    """
    if m < 1:
        raise ValueError("embedding dimension must be at least 1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if len(s) < m + 1:
        raise TooShort(f"{s.name}: {len(s)} observations give fewer than two {m}-histories")
    return _correlation_sum(distance_indicators(s.values, eps), m)


def _bds_variance(indicators: np.ndarray, dims: Sequence[int]) -> Tuple[Dict[int, float], float]:
    nobs = len(indicators)
    c1 = _correlation_sum(indicators, 1)
    row = indicators.sum(axis=1, dtype=np.int64).astype(float)
    k = ((row**2).sum() - 3.0 * row.sum() + 2.0 * nobs) / (nobs * (nobs - 1.0) * (nobs - 2.0))
    variances: Dict[int, float] = {}
    for m in dims:
        tmp = sum(k ** (m - j) * c1 ** (2 * j) for j in range(1, m))
        variances[m] = 4.0 * (
            k**m + 2.0 * tmp + (m - 1) ** 2 * c1 ** (2 * m) - m**2 * k * c1 ** (2 * m - 2)
        )
    return variances, c1


def bds_test(
    s: Series,
    dims: Iterable[int] = range(2, 7),
    eps_rule: EpsilonRule = EpsilonRule(),
) -> BdsResult:
    """
    BDS statistics for each embedding dimension with two-sided normal p-values.

    Args:
        s: Series, at least 50 observations.
        dims: Embedding dimensions, each at least 2.
        eps_rule: Threshold rule; the default is 0.7 sample standard deviations.
    """
    dims = sorted(set(int(m) for m in dims))
    x = np.asarray(s.values, dtype=float)
    if len(x) < MIN_BDS_OBS:
        raise TooShort(f"{s.name}: BDS needs at least {MIN_BDS_OBS} observations")
    if not dims or dims != list(range(2, dims[-1] + 1)) or dims[-1] >= len(x):
        raise ValueError("embedding dimensions must run contiguously from 2 and stay below nobs")

    eps = eps_rule.resolve(x)
    if not eps > 0:
        raise DegenerateEpsilon(f"{s.name}: threshold {eps} is not positive")
    indicators = distance_indicators(x, eps)
    variances, c1_full = _bds_variance(indicators, dims)
    if c1_full <= 0.0 or c1_full >= 1.0:
        raise DegenerateEpsilon(f"{s.name}: C_1 = {c1_full} at eps = {eps}")

    per_dimension: Dict[int, BdsDimension] = {}
    for m in dims:
        ninitial = m - 1
        nobs = len(x) - ninitial
        c1 = _correlation_sum(indicators[ninitial:, ninitial:], 1)
        cm = _correlation_sum(indicators, m)
        sd = np.sqrt(variances[m])
        z = float(np.sqrt(nobs) * (cm - c1**m) / sd)
        per_dimension[m] = BdsDimension(statistic=z, p_value=float(2.0 * stats.norm.sf(abs(z))))

    logfire.debug(
        "BDS computed",
        series=s.name,
        epsilon=eps,
        statistics={m: d.statistic for m, d in per_dimension.items()},
    )
    return BdsResult(
        series=s.name,
        epsilon=eps,
        per_dimension=per_dimension,
        n_effective=len(x) - dims[-1] + 1,
    )


def bds_on_var_residuals(
    system: Sequence[Series],
    lag: int,
    dims: Iterable[int] = range(2, 7),
    eps_rule: EpsilonRule = EpsilonRule(),
) -> Dict[str, BdsResult]:
    """Fit a VAR(lag) and run the BDS test on each equation's residuals."""
    model = fit_var(system, lag)
    dims = list(dims)
    return {name: bds_test(resid, dims, eps_rule) for name, resid in model.residuals.items()}
