"""
Unit-root tests: augmented Dickey-Fuller, Phillips-Perron and an innovational-outlier
break test with an endogenously chosen break date.

ADF and PP are delegated to ``arch.unitroot``; the break test runs its own OLS
regressions over every admissible break date.
"""

import math
from typing import Dict, FrozenSet, Optional, Tuple

import logfire
import numpy as np
from arch.unitroot import ADF, PhillipsPerron
from arch.utility.exceptions import InfeasibleTestException

from econometrics.errors import SingularRegression, TooShort
from models.schema import SIGNIFICANCE_LEVELS, Criterion, Deterministic, Series, UnitRootResult, UnitRootTest

_ARCH_KEYS = {"1%": 0.01, "5%": 0.05, "10%": 0.10}
MIN_BREAK_OBS = 50

# Critical values of the minimum t-statistic in the innovational-outlier model with
# intercept and trend shifts: the T = 100 finite-sample row and the asymptotic row.
# Between them the values are interpolated linearly in 1/T; below T = 100 the
# finite-sample row is used as is.
_BREAK_CV_BASE_NOBS = 100
_BREAK_CV_FINITE: Tuple[float, float, float] = (-6.32, -5.59, -5.29)
_BREAK_CV_ASYMPTOTIC: Tuple[float, float, float] = (-5.57, -5.08, -4.82)


def _reject(statistic: float, critical_values: Dict[float, float]) -> FrozenSet[float]:
    return frozenset(level for level, cv in critical_values.items() if statistic < cv)


def _critical_values(res) -> Dict[float, float]:
    return {_ARCH_KEYS[k]: float(v) for k, v in res.critical_values.items() if k in _ARCH_KEYS}


def _check_variation(s: Series) -> None:
    if np.ptp(s.values) == 0.0:
        raise SingularRegression(f"{s.name} is constant")


def adf_test(
    s: Series,
    deterministic: Deterministic = Deterministic.CONSTANT,
    max_lag: int = 12,
    criterion: Criterion = Criterion.BIC,
) -> UnitRootResult:
    """
    Augmented Dickey-Fuller test with information-criterion lag selection.

    Args:
        s: Series under test.
        deterministic: Constant, or constant plus linear trend.
        max_lag: Largest augmentation lag considered.
        criterion: AIC or BIC for choosing the lag.

    Returns:
        The t-ratio on the lagged level with MacKinnon p-value and critical values.
    """
    if len(s) < max_lag + 10:
        raise TooShort(f"{s.name}: ADF needs at least {max_lag + 10} observations")
    _check_variation(s)
    try:
        if max_lag == 0:
            res = ADF(np.asarray(s.values), lags=0, trend=deterministic.value)
        else:
            res = ADF(
                np.asarray(s.values),
                trend=deterministic.value,
                max_lags=max_lag,
                method=criterion.value,
            )
        statistic = float(res.stat)
        cvs = _critical_values(res)
        p_value = float(res.pvalue)
        lags = int(res.lags)
    except (np.linalg.LinAlgError, InfeasibleTestException) as exc:
        raise SingularRegression(f"{s.name}: {exc}") from exc

    return UnitRootResult(
        test=UnitRootTest.ADF,
        series=s.name,
        deterministic=deterministic,
        statistic=statistic,
        lag_or_bandwidth=lags,
        p_value=p_value,
        critical_values=cvs,
        reject_at=_reject(statistic, cvs),
    )


def newey_west_bandwidth(nobs: int) -> int:
    """Automatic long-run variance bandwidth floor(4 (T/100)^(2/9))."""
    return int(math.floor(4.0 * (nobs / 100.0) ** (2.0 / 9.0)))


def pp_test(
    s: Series,
    deterministic: Deterministic = Deterministic.CONSTANT,
    bandwidth: Optional[int] = None,
) -> UnitRootResult:
    """
    Phillips-Perron Z-tau test with a Bartlett long-run variance.

    Args:
        s: Series under test.
        deterministic: Constant, or constant plus linear trend.
        bandwidth: Fixed bandwidth, or None for the Newey-West automatic rule.
    """
    if len(s) < 20:
        raise TooShort(f"{s.name}: PP needs at least 20 observations")
    _check_variation(s)
    bw = newey_west_bandwidth(len(s)) if bandwidth is None else int(bandwidth)
    try:
        res = PhillipsPerron(
            np.asarray(s.values), lags=bw, trend=deterministic.value, test_type="tau"
        )
        statistic = float(res.stat)
        cvs = _critical_values(res)
        p_value = float(res.pvalue)
    except (np.linalg.LinAlgError, InfeasibleTestException) as exc:
        raise SingularRegression(f"{s.name}: {exc}") from exc

    return UnitRootResult(
        test=UnitRootTest.PP,
        series=s.name,
        deterministic=deterministic,
        statistic=statistic,
        lag_or_bandwidth=bw,
        p_value=p_value,
        critical_values=cvs,
        reject_at=_reject(statistic, cvs),
    )


def break_critical_values(nobs: int) -> Dict[float, float]:
    """Interpolated 1%, 5% and 10% critical values of the break test."""
    w = _BREAK_CV_BASE_NOBS / max(nobs, _BREAK_CV_BASE_NOBS)
    values = [a + w * (f - a) for f, a in zip(_BREAK_CV_FINITE, _BREAK_CV_ASYMPTOTIC)]
    return dict(zip(SIGNIFICANCE_LEVELS, values))


def _ols_t_unit(X: np.ndarray, y: np.ndarray, col: int) -> Tuple[float, float]:
    """Return (t-ratio of coefficient ``col`` against one, residual sum of squares)."""
    xtx = X.T @ X
    xtx_inv = np.linalg.inv(xtx)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = X.shape[0] - X.shape[1]
    s2 = rss / dof
    se = math.sqrt(s2 * xtx_inv[col, col])
    return (beta[col] - 1.0) / se, rss


def perron_break_test(
    s: Series,
    max_lag: int = 8,
    criterion: Criterion = Criterion.BIC,
    trim: float = 0.15,
) -> UnitRootResult:
    """
    Unit-root test allowing one break in intercept and trend slope.

    For every candidate break date in the central (1 - 2 trim) share of the sample the
    innovational-outlier regression

        y_t = mu + theta DU_t + beta t + gamma DT_t + delta D(Tb)_t + alpha y_{t-1}
              + sum_i c_i dy_{t-i} + e_t

    is estimated, with the augmentation lag picked by ``criterion``. The break date
    minimising the t-ratio of alpha = 1 is reported; ties go to the earliest date.
    """
    y = np.asarray(s.values, dtype=float)
    n = len(y)
    needed = max(MIN_BREAK_OBS, max_lag + 30)
    if n < needed:
        raise TooShort(f"{s.name}: break test needs at least {needed} observations")
    _check_variation(s)

    dy = np.diff(y, prepend=np.nan)
    start = max_lag + 1
    rows = np.arange(start, n)
    nobs = len(rows)
    trend = rows.astype(float)
    y_lag = y[rows - 1]
    lagged_dy = np.column_stack([dy[rows - i] for i in range(1, max_lag + 1)]) if max_lag else None
    target = y[rows]
    penalty = 2.0 if criterion == Criterion.AIC else math.log(nobs)

    first = max(int(math.floor(trim * n)), start)
    last = min(int(math.ceil((1.0 - trim) * n)), n - 3)

    best_stat = math.inf
    best_break = -1
    best_lag = 0
    for tb in range(first, last + 1):
        du = (rows > tb).astype(float)
        dt = np.where(rows > tb, rows - tb, 0).astype(float)
        pulse = (rows == tb + 1).astype(float)
        base = np.column_stack([np.ones(nobs), du, trend, dt, pulse, y_lag])
        chosen: Optional[Tuple[float, int]] = None
        best_ic = math.inf
        for k in range(max_lag + 1):
            X = base if k == 0 else np.hstack([base, lagged_dy[:, :k]])
            try:
                t_stat, rss = _ols_t_unit(X, target, 5)
            except np.linalg.LinAlgError:
                continue
            if not np.isfinite(t_stat) or rss <= 0.0:
                continue
            ic = nobs * math.log(rss / nobs) + penalty * X.shape[1]
            if ic < best_ic:
                best_ic = ic
                chosen = (t_stat, k)
        if chosen is not None and chosen[0] < best_stat:
            best_stat, best_lag = chosen
            best_break = tb

    if best_break < 0:
        raise SingularRegression(f"{s.name}: no break date gave a nonsingular regression")

    cvs = break_critical_values(n)
    logfire.debug(
        "Break test finished",
        series=s.name,
        break_date=str(s.timestamps[best_break]),
        statistic=best_stat,
        lag=best_lag,
    )
    return UnitRootResult(
        test=UnitRootTest.PERRON,
        series=s.name,
        deterministic=Deterministic.CONSTANT_TREND,
        statistic=float(best_stat),
        lag_or_bandwidth=int(best_lag),
        p_value=None,
        critical_values=cvs,
        reject_at=_reject(best_stat, cvs),
        break_date=s.timestamps[best_break],
    )
