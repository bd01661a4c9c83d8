"""
Nonparametric Granger causality tests.

Two kernel-based tests on standardised series with equal cause and effect lag length:

* hj_test: the modified Baek-Brock test comparing conditional correlation
  integrals, with a delta-method variance built from the U-statistic projections.
* dp_test: the density-ratio test whose kernel is symmetrised over triples,
  which removes the bias of the former under conditional heteroskedasticity.

Both return a one-sided p-value from the standard normal upper tail.
"""

import math
from typing import Literal, Optional, Tuple, Union

import logfire
import numpy as np
from scipy import stats

from econometrics.errors import DegenerateDistances, LengthMismatch, TimestampMismatch, TooShort
from models.schema import NonparamCausalityResult, NonparamKind, Series

DEFAULT_BANDWIDTH = 1.5
DP_BANDWIDTH_CONSTANT = 8.0
MIN_USABLE_OBS = 50


def _standardise(x: np.ndarray) -> np.ndarray:
    sd = np.std(x, ddof=1)
    if sd == 0.0:
        raise DegenerateDistances("series has zero variance")
    return (x - np.mean(x)) / sd


def _embed_indicators(x: np.ndarray, y: np.ndarray, lag: int, eps: float):
    """
    Pairwise closeness of the lagged cause, lagged effect and effect lead.

    Observation t (t = lag..T-1) carries X = (x_{t-1..t-lag}), Y = (y_{t-1..t-lag})
    and Z = y_t. Each returned matrix is boolean, n x n with n = T - lag, and has
    a false diagonal so that only distinct pairs count.
    """
    n = len(y) - lag

    def closeness(series: np.ndarray, offsets) -> np.ndarray:
        ind = np.ones((n, n), dtype=bool)
        for k in offsets:
            col = series[lag - k : lag - k + n]
            ind &= np.abs(col[:, None] - col[None, :]) < eps
        np.fill_diagonal(ind, False)
        return ind

    ix = closeness(x, range(1, lag + 1))
    iy = closeness(y, range(1, lag + 1))
    iz = closeness(y, [0])
    return ix, iy, iz


def _long_run_variance(series: np.ndarray, bandwidth: Optional[int] = None) -> np.ndarray:
    """Bartlett-weighted long-run covariance of the columns of ``series``."""
    a = np.atleast_2d(series.T).T
    a = a - a.mean(axis=0)
    n = a.shape[0]
    K = int(math.floor(n ** 0.25)) if bandwidth is None else bandwidth
    lrv = a.T @ a / n
    for k in range(1, K + 1):
        w = 1.0 - k / (K + 1.0)
        gamma = a[k:].T @ a[:-k] / n
        lrv += w * (gamma + gamma.T)
    return lrv


def _prepare(cause: Series, effect: Series, lag: int):
    if len(cause) != len(effect):
        raise LengthMismatch(
            f"{cause.name} has {len(cause)} observations, {effect.name} has {len(effect)}"
        )
    if not cause.timestamps.equals(effect.timestamps):
        raise TimestampMismatch(f"{cause.name} and {effect.name} do not share timestamps")
    if lag < 1:
        raise ValueError("lag must be at least 1")
    if len(effect) - lag < MIN_USABLE_OBS:
        raise TooShort(
            f"nonparametric causality at lag {lag} needs {MIN_USABLE_OBS + lag} observations"
        )
    x = _standardise(np.asarray(cause.values, dtype=float))
    y = _standardise(np.asarray(effect.values, dtype=float))
    return x, y


def conditional_correlation_integrals(
    cause: Series, effect: Series, lag: int, eps: float
) -> Tuple[float, float, float, float]:
    """
    The four correlation integrals of the modified Baek-Brock test.

    Returns:
        (C1, C2, C3, C4) for the joint (lead, lagged effect, lagged cause), the lags
        only, the effect lead and lags, and the effect lags only, on standardised data.
    """
    x, y = _prepare(cause, effect, lag)
    ix, iy, iz = _embed_indicators(x, y, lag, eps)
    n = ix.shape[0]
    pairs = n * (n - 1)
    c1 = np.count_nonzero(iz & iy & ix) / pairs
    c2 = np.count_nonzero(iy & ix) / pairs
    c3 = np.count_nonzero(iz & iy) / pairs
    c4 = np.count_nonzero(iy) / pairs
    return c1, c2, c3, c4


def hj_test(
    cause: Series, effect: Series, lag: int, bandwidth: float = DEFAULT_BANDWIDTH
) -> NonparamCausalityResult:
    """
    Modified Baek-Brock test of ``cause`` not Granger-causing ``effect``.

    The statistic is sqrt(n) (C1/C2 - C3/C4) / sigma, where sigma comes from the
    delta method applied to the long-run covariance of the per-observation
    correlation sums.
    """
    x, y = _prepare(cause, effect, lag)
    ix, iy, iz = _embed_indicators(x, y, lag, bandwidth)
    n = ix.shape[0]

    i1 = iz & iy & ix
    i2 = iy & ix
    i3 = iz & iy
    local = np.column_stack(
        [m.sum(axis=1, dtype=np.int64) / (n - 1.0) for m in (i1, i2, i3, iy)]
    )
    c1, c2, c3, c4 = local.mean(axis=0)
    if c2 < 1e-12 or c4 < 1e-12:
        raise DegenerateDistances(f"bandwidth {bandwidth} leaves no close pairs of lags")

    grad = np.array([1.0 / c2, -c1 / c2**2, -1.0 / c4, c3 / c4**2])
    cov = 4.0 * _long_run_variance(local)
    variance = float(grad @ cov @ grad)
    if not variance > 0.0:
        raise DegenerateDistances("nonpositive variance estimate")

    statistic = math.sqrt(n) * (c1 / c2 - c3 / c4) / math.sqrt(variance)
    p_value = float(stats.norm.sf(statistic))
    logfire.debug(
        "Hiemstra-Jones computed", cause=cause.name, effect=effect.name, lag=lag, statistic=statistic
    )
    return NonparamCausalityResult(
        kind=NonparamKind.HJ,
        cause=cause.name,
        effect=effect.name,
        lag=lag,
        bandwidth=bandwidth,
        statistic=float(statistic),
        p_value=p_value,
    )


def diks_panchenko_bandwidth(nobs: int, constant: float = DP_BANDWIDTH_CONSTANT) -> float:
    """Sample-size dependent bandwidth max(1.5, C n^(-2/7))."""
    return max(DEFAULT_BANDWIDTH, constant * nobs ** (-2.0 / 7.0))


def dp_test(
    cause: Series,
    effect: Series,
    lag: int,
    bandwidth: Union[float, Literal["auto"]] = DEFAULT_BANDWIDTH,
) -> NonparamCausalityResult:
    """
    Diks-Panchenko test of ``cause`` not Granger-causing ``effect``.

    The bandwidth is 1.5 unless given; ``"auto"`` switches to the sample-size rule
    of diks_panchenko_bandwidth on the effective sample.

    The order-3 U-statistic averages f_XYZ f_Y - f_XY f_YZ over observations. Its
    variance is nine times the long-run variance of the kernel projection onto a
    single observation. The 2 eps density normalisations cancel in the studentised
    statistic and are omitted.
    """
    x, y = _prepare(cause, effect, lag)
    n_eff = len(y) - lag
    if bandwidth == "auto":
        eps = diks_panchenko_bandwidth(n_eff)
    elif isinstance(bandwidth, str):
        raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
    else:
        eps = float(bandwidth)
    ix, iy, iz = _embed_indicators(x, y, lag, eps)
    n = ix.shape[0]

    ixyz = (ix & iy & iz).astype(float)
    ixy = (ix & iy).astype(float)
    iyz = (iy & iz).astype(float)
    iyf = iy.astype(float)

    a = ixyz.sum(axis=1)
    b = iyf.sum(axis=1)
    c = ixy.sum(axis=1)
    d = iyz.sum(axis=1)
    if not (b > 0).any():
        raise DegenerateDistances(f"bandwidth {eps} leaves no close pairs of effect lags")

    centre = a * b - c * d
    scale = (n - 1.0) * (n - 2.0)
    statistic_u = centre.sum() / (n * scale)

    # Projection of the symmetrised kernel onto observation i.
    cross = iyf @ a - iyz @ c + ixyz @ b - ixy @ d
    projection = (2.0 * centre + 2.0 * cross) / (6.0 * scale)

    variance = 9.0 * float(_long_run_variance(projection)[0, 0])
    if not variance > 0.0:
        raise DegenerateDistances("nonpositive variance estimate")

    statistic = math.sqrt(n) * statistic_u / math.sqrt(variance)
    p_value = float(stats.norm.sf(statistic))
    logfire.debug(
        "Diks-Panchenko computed", cause=cause.name, effect=effect.name, lag=lag, statistic=statistic
    )
    return NonparamCausalityResult(
        kind=NonparamKind.DP,
        cause=cause.name,
        effect=effect.name,
        lag=lag,
        bandwidth=eps,
        statistic=float(statistic),
        p_value=p_value,
    )
