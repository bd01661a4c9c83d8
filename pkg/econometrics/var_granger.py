"""
Vector autoregressions and linear Granger causality.

Each equation is estimated by OLS with statsmodels; Granger causality is a Wald test
that every lag of the cause drops out of the effect's equation.
"""

import math
from typing import Dict, List, Optional, Sequence

import logfire
import numpy as np
import statsmodels.api as sm
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy import stats

from econometrics.errors import TimestampMismatch, SingularDesign, TooShort, UnknownVariable
from models.schema import DECISION_LEVEL, Criterion, GrangerTestResult, Series


class VarModel(BaseModel):
    """A fitted VAR(p) with intercept."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    names: List[str] = Field(description="Variables in equation order")
    lags: int
    nobs: int = Field(description="Effective sample size T - p")
    coefficients: np.ndarray = Field(
        description="k x (k p + 1); column 0 is the intercept, then lag 1 block, lag 2 block..."
    )
    residuals: Dict[str, Series]
    sigma: np.ndarray = Field(description="Residual covariance with 1/(T - p) scaling")
    aic: float
    bic: float

    _results: list = PrivateAttr(default_factory=list)

    def coefficient_index(self, cause: str, lag: int) -> int:
        k = len(self.names)
        return 1 + (lag - 1) * k + self.names.index(cause)


def _stack(system: Sequence[Series]) -> np.ndarray:
    if not system:
        raise TooShort("empty system")
    first = system[0]
    for s in system[1:]:
        if not s.timestamps.equals(first.timestamps):
            raise TimestampMismatch(f"{s.name} and {first.name} do not share timestamps")
    names = [s.name for s in system]
    if len(set(names)) != len(names):
        raise UnknownVariable(f"duplicate variable names in {names}")
    return np.column_stack([np.asarray(s.values, dtype=float) for s in system])


def _design(data: np.ndarray, p: int, start: int) -> np.ndarray:
    """Rows t = start..T-1 of [1, y_{t-1}', ..., y_{t-p}']."""
    n = data.shape[0]
    rows = np.arange(start, n)
    blocks = [np.ones((len(rows), 1))]
    blocks.extend(data[rows - lag] for lag in range(1, p + 1))
    return np.hstack(blocks)


def _fit(system: Sequence[Series], p: int, start: Optional[int] = None) -> VarModel:
    data = _stack(system)
    n, k = data.shape
    start = p if start is None else start
    nobs = n - start
    n_params = k * p + 1
    if p < 1:
        raise ValueError("VAR order must be at least 1")
    if nobs <= n_params:
        raise TooShort(f"VAR({p}) with {k} variables needs more than {n_params + start} observations")

    X = _design(data, p, start)
    if np.linalg.matrix_rank(X) < n_params:
        raise SingularDesign(f"VAR({p}) design has rank below {n_params}")

    results = []
    coefficients = np.empty((k, n_params))
    resid = np.empty((nobs, k))
    for i in range(k):
        res = sm.OLS(data[start:, i], X).fit()
        results.append(res)
        coefficients[i] = res.params
        resid[:, i] = res.resid

    sigma = resid.T @ resid / nobs
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        logdet = -np.inf
    n_coef = k * n_params
    aic = logdet + 2.0 * n_coef / nobs
    bic = logdet + math.log(nobs) * n_coef / nobs

    index = system[0].timestamps[start:]
    residuals = {
        s.name: Series(name=f"{s.name}_resid", timestamps=index, values=resid[:, i])
        for i, s in enumerate(system)
    }
    model = VarModel(
        names=[s.name for s in system],
        lags=p,
        nobs=nobs,
        coefficients=coefficients,
        residuals=residuals,
        sigma=sigma,
        aic=float(aic),
        bic=float(bic),
    )
    model._results = results
    return model


def fit_var(system: Sequence[Series], p: int) -> VarModel:
    """
    Fit a VAR(p) with intercept by equation-wise OLS.

    Args:
        system: Aligned series, one per variable.
        p: Lag order, at least 1.

    Returns:
        The fitted model with residuals and information criteria.
    """
    model = _fit(system, p)
    logfire.debug("VAR fitted", variables=model.names, lags=p, aic=model.aic, bic=model.bic)
    return model


def select_lag(
    system: Sequence[Series], max_p: int, criterion: Criterion = Criterion.AIC
) -> int:
    """Lag order in 1..max_p minimising the criterion on a common estimation sample."""
    if max_p < 1:
        raise ValueError("max_p must be at least 1")
    scores = []
    for p in range(1, max_p + 1):
        model = _fit(system, p, start=max_p)
        scores.append(model.aic if criterion == Criterion.AIC else model.bic)
    # argmin keeps the first minimum, so ties go to the smaller order.
    return int(np.argmin(scores)) + 1


def granger_wald(model: VarModel, cause: str, effect: str) -> GrangerTestResult:
    """
    Wald test that all lags of ``cause`` are zero in the ``effect`` equation.

    The statistic is chi-squared with p degrees of freedom under the null.
    """
    for name in (cause, effect):
        if name not in model.names:
            raise UnknownVariable(f"{name!r} is not one of {model.names}")
    eq = model._results[model.names.index(effect)]
    idx = [model.coefficient_index(cause, lag) for lag in range(1, model.lags + 1)]
    beta = np.asarray(eq.params)[idx]
    cov = np.asarray(eq.cov_params())[np.ix_(idx, idx)]
    statistic = float(beta @ np.linalg.solve(cov, beta))
    p_value = float(stats.chi2.sf(statistic, model.lags))
    return GrangerTestResult(
        cause=cause,
        effect=effect,
        lag=model.lags,
        chi_sq=max(statistic, 0.0),
        p_value=p_value,
        decision=p_value <= DECISION_LEVEL,
    )


def granger_table(
    system: Sequence[Series],
    pairs: Sequence[tuple],
    lags: Optional[int] = None,
    max_p: int = 12,
    criterion: Criterion = Criterion.AIC,
) -> List[GrangerTestResult]:
    """
    Granger tests for each (cause, effect) pair in one VAR.

    The lag order is ``lags`` when given, otherwise chosen by ``criterion``.
    """
    p = lags if lags is not None else select_lag(system, max_p, criterion)
    model = fit_var(system, p)
    return [granger_wald(model, cause, effect) for cause, effect in pairs]
