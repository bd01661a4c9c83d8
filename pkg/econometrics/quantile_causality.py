"""
Granger causality in quantiles.

A quantile autoregression of the effect on its own lags is fitted at every level of a
quantile grid by minimising the check loss as a linear programme. The indicators
1{y_t <= q_t(tau)} - tau then have conditional mean zero under the null that the
lagged cause carries no information about the tau-quantile of the effect. The S_T
statistic weights their cross products with a Gaussian kernel of distances between
standardised information vectors (own lags and lags of the cause), and p-values come
from subsampling contiguous blocks.

The augmented QAR(3) adds the first lag of the cause to the quantile regression and
reports its coefficient with moving-block bootstrap bands, which signs the effect.
"""

import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import logfire
import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial.distance import pdist, squareform

from econometrics.errors import BlockTooShort, LengthMismatch, NonConvergence, TooShort
from models.schema import (
    AugmentedQarCoefficient,
    CausalityQuantileResult,
    QarModel,
    QuantileCell,
    QuantileGrid,
    Series,
    SubsamplingConfig,
)

# Normal-consistent scaling of the mean absolute deviation.
MAD_TO_SIGMA = math.sqrt(math.pi / 2.0)
SIGMA_FLOOR = 1e-12
MIN_BLOCK_SIZE = 20
MIN_BLOCKS = 50
BAND_Z = 1.96


def check_loss(u: np.ndarray, tau: float) -> np.ndarray:
    """rho_tau(u) = u (tau - 1{u < 0})."""
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0.0))


def _lag_matrix(x: np.ndarray, lags: int, start: int) -> np.ndarray:
    """Columns x_{t-1}, ..., x_{t-lags} for rows t = start..T-1."""
    rows = np.arange(start, len(x))
    if lags == 0:
        return np.empty((len(rows), 0))
    return np.column_stack([x[rows - k] for k in range(1, lags + 1)])


def _solve_check_loss(X: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    """
    Quantile regression coefficients as the solution of

        min tau 1'u+ + (1 - tau) 1'u-   s.t.  X b + u+ - u- = y,  u+, u- >= 0.

    The dual simplex returns a basic solution, so the minimiser is a vertex that
    interpolates k observations and repeated calls on identical input agree exactly.
    """
    n, k = X.shape
    cost = np.concatenate([np.zeros(k), np.full(n, tau), np.full(n, 1.0 - tau)])
    eye = sparse.identity(n, format="csc")
    a_eq = sparse.hstack([sparse.csc_matrix(X), eye, -eye], format="csc")
    bounds = [(None, None)] * k + [(0.0, None)] * (2 * n)
    res = linprog(cost, A_eq=a_eq, b_eq=y, bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise NonConvergence(tau, res.message)
    return np.asarray(res.x[:k])


def _quantile_lines(
    y: np.ndarray, order: int, levels: Sequence[float], start: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients (levels x (order + 1)) and fitted quantiles (rows x levels)."""
    X = np.hstack([np.ones((len(y) - start, 1)), _lag_matrix(y, order, start)])
    target = y[start:]
    theta = np.vstack([_solve_check_loss(X, target, tau) for tau in levels])
    # Column by column, so a level's fitted line does not depend on the rest of the grid.
    fitted = np.column_stack([X @ row for row in theta])
    return theta, fitted


def rearrange(fitted: np.ndarray) -> np.ndarray:
    """Monotone rearrangement: sort fitted quantiles across levels at every row."""
    return np.sort(fitted, axis=1)


def fit_qar(y: Series, order: int, grid: QuantileGrid, start: Optional[int] = None) -> QarModel:
    """
    Fit a QAR(order) at every grid level.

    Args:
        y: Effect series.
        order: Autoregressive order, 1 to 3.
        grid: Quantile levels.
        start: First fitted row; defaults to ``order``.

    Returns:
        The per-level coefficients, the innovation scale and the rearranged fitted
        conditional quantiles.
    """
    if order not in (1, 2, 3):
        raise ValueError("QAR order must be 1, 2 or 3")
    x = np.asarray(y.values, dtype=float)
    needed = 10 * (order + 2)
    if len(x) < needed:
        raise TooShort(f"{y.name}: QAR({order}) needs at least {needed} observations")
    start = order if start is None else start

    theta, fitted = _quantile_lines(x, order, grid.levels, start)
    if 0.5 in grid.levels:
        median_line = fitted[:, grid.levels.index(0.5)]
    else:
        _, median_fit = _quantile_lines(x, order, [0.5], start)
        median_line = median_fit[:, 0]
    sigma = max(float(np.mean(np.abs(x[start:] - median_line))) * MAD_TO_SIGMA, SIGMA_FLOOR)

    return QarModel(
        order=order,
        grid=grid,
        theta={tau: tuple(float(c) for c in row) for tau, row in zip(grid.levels, theta)},
        sigma=sigma,
        fitted_quantiles=rearrange(fitted),
        start=start,
    )


def standardise_columns(info: np.ndarray) -> np.ndarray:
    """Centre and scale each column to unit variance; constant columns become zero."""
    info = np.asarray(info, dtype=float)
    centred = info - info.mean(axis=0)
    sd = info.std(axis=0)
    safe = np.where(sd > 0.0, sd, 1.0)
    return np.where(sd > 0.0, centred / safe, 0.0)


def gaussian_kernel_matrix(info: np.ndarray) -> np.ndarray:
    """w_ts = exp(-||I_t - I_s||^2 / 2) over the rows of ``info``."""
    info = np.atleast_2d(np.asarray(info, dtype=float))
    if info.shape[1] == 0:
        return np.ones((info.shape[0], info.shape[0]))
    return np.exp(-0.5 * squareform(pdist(info, metric="sqeuclidean")))


def quantile_indicators(y: np.ndarray, fitted: np.ndarray, levels: Sequence[float]) -> np.ndarray:
    """psi_tj = 1{y_t - q_tj <= 0} - tau_j."""
    below = (np.asarray(y, dtype=float)[:, None] - fitted) <= 0.0
    return below.astype(float) - np.asarray(levels, dtype=float)[None, :]


def st_from_components(psi: np.ndarray, w: np.ndarray) -> float:
    """
    S_T = sum_j psi_j' W psi_j / (T n).

    Every term (psi_tj w_ts) psi_sj is summed with exact rounding, so the result does
    not depend on the summation order.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 1:
        psi = psi[:, None]
    T, n = psi.shape
    terms = (psi[:, None, :] * w[:, :, None]) * psi[None, :, :]
    per_level = terms.sum(axis=(0, 1))
    if np.any(per_level < -1e-9 * max(1.0, float(np.abs(terms).sum()))):
        logfire.warn("Negative kernel quadratic form", forms=per_level.tolist())
    total = math.fsum(terms.ravel().tolist()) / (T * n)
    return max(total, 0.0)


def _information(
    y: np.ndarray, z: np.ndarray, qar_order: int, q_lags: int, start: int
) -> np.ndarray:
    return np.hstack([_lag_matrix(y, qar_order, start), _lag_matrix(z, q_lags, start)])


def _cell_statistics(
    y: np.ndarray,
    z: np.ndarray,
    qar_order: int,
    q_lags: int,
    levels: Sequence[float],
    joint: bool,
) -> Dict[Optional[float], float]:
    """
    S statistics for one sample: one per level from the raw fitted line, plus the joint
    statistic over all levels from the rearranged lines when ``joint`` is set.
    """
    start = max(qar_order, q_lags)
    _, fitted = _quantile_lines(y, qar_order, levels, start)
    target = y[start:]
    w = gaussian_kernel_matrix(standardise_columns(_information(y, z, qar_order, q_lags, start)))
    out: Dict[Optional[float], float] = {}
    if joint:
        psi = quantile_indicators(target, rearrange(fitted), levels)
        out[None] = st_from_components(psi, w)
    for j, tau in enumerate(levels):
        psi = quantile_indicators(target, fitted[:, j : j + 1], [tau])
        out[tau] = st_from_components(psi, w)
    return out


def _check_pair(y: Series, z: Series) -> Tuple[np.ndarray, np.ndarray]:
    if len(y) != len(z):
        raise LengthMismatch(f"{y.name} has {len(y)} observations, {z.name} has {len(z)}")
    return np.asarray(y.values, dtype=float), np.asarray(z.values, dtype=float)


def st_statistic(
    y: Series,
    z: Series,
    qar_order: int,
    grid: QuantileGrid,
    q_lags: Optional[int] = None,
) -> float:
    """
    S_T statistic for ``z`` not Granger-causing ``y`` over the levels of ``grid``.

    The QAR(qar_order) is fitted on the sample from max(qar_order, q_lags) onwards, the
    common range on which the information vector (own lags, then q_lags lags of z) is
    defined. Fitted lines are rearranged before the indicators are formed.
    """
    q_lags = qar_order if q_lags is None else q_lags
    yv, zv = _check_pair(y, z)
    needed = 10 * (qar_order + 2)
    if len(yv) < needed:
        raise TooShort(f"{y.name}: QAR({qar_order}) needs at least {needed} observations")
    start = max(qar_order, q_lags)
    model = fit_qar(y, qar_order, grid, start=start)
    w = gaussian_kernel_matrix(standardise_columns(_information(yv, zv, qar_order, q_lags, start)))
    psi = quantile_indicators(yv[start:], model.fitted_quantiles, grid.levels)
    return st_from_components(psi, w)


def _block_starts(
    nobs: int, cfg: SubsamplingConfig, qar_order: int, q_lags: int
) -> Tuple[int, np.ndarray]:
    b = cfg.block_size(nobs)
    n_blocks = nobs - b + 1
    if b >= nobs:
        raise BlockTooShort(f"block size {b} is not below the sample size {nobs}")
    if b < MIN_BLOCK_SIZE:
        raise BlockTooShort(f"block size {b} is below {MIN_BLOCK_SIZE}")
    if n_blocks < MIN_BLOCKS:
        raise BlockTooShort(f"{n_blocks} blocks is below the minimum of {MIN_BLOCKS}")
    rows = b - max(qar_order, q_lags)
    if rows < 5 * (qar_order + 2):
        raise BlockTooShort(f"blocks of {b} leave {rows} rows for a QAR({qar_order})")
    starts = np.arange(n_blocks)
    if cfg.max_blocks is not None and cfg.max_blocks < n_blocks:
        rng = np.random.default_rng(cfg.seed)
        starts = np.sort(rng.choice(n_blocks, size=cfg.max_blocks, replace=False))
    return b, starts


def _subsample(
    y: np.ndarray,
    z: np.ndarray,
    qar_order: int,
    q_lags: int,
    levels: Sequence[float],
    joint: bool,
    cfg: SubsamplingConfig,
) -> Tuple[Dict[Optional[float], float], Dict[Optional[float], np.ndarray], int, int]:
    b, starts = _block_starts(len(y), cfg, qar_order, q_lags)
    full = _cell_statistics(y, z, qar_order, q_lags, levels, joint)
    draws: Dict[Optional[float], List[float]] = {key: [] for key in full}
    for count, i in enumerate(starts, start=1):
        block = _cell_statistics(y[i : i + b], z[i : i + b], qar_order, q_lags, levels, joint)
        for key, value in block.items():
            draws[key].append(value)
        if count % 100 == 0:
            logfire.debug("Subsampling progress", blocks_done=count, blocks=len(starts))
    return full, {key: np.asarray(v) for key, v in draws.items()}, b, len(starts)


def subsample_pvalue(
    y: Series,
    z: Series,
    qar_order: int,
    grid: QuantileGrid,
    q_lags: Optional[int] = None,
    cfg: SubsamplingConfig = SubsamplingConfig(),
) -> float:
    """
    Share of block statistics at least as large as the full-sample S_T.

    The QAR is re-estimated in every block of length b = floor(k T^(2/5)).
    """
    q_lags = qar_order if q_lags is None else q_lags
    yv, zv = _check_pair(y, z)
    joint = len(grid) > 1
    full, draws, _, _ = _subsample(yv, zv, qar_order, q_lags, grid.levels, joint, cfg)
    key = None if joint else grid.levels[0]
    return float(np.mean(draws[key] >= full[key]))


def causality_table(
    y: Series,
    z: Series,
    orders: Iterable[int] = (1, 2, 3),
    grid: QuantileGrid = QuantileGrid.deciles(),
    cfg: SubsamplingConfig = SubsamplingConfig(),
) -> CausalityQuantileResult:
    """
    Subsampling p-values for ``z`` not causing ``y``, per lag order and grid cell.

    For every order p the QAR(p) is paired with p lags of z. The joint cell tests all
    grid levels in one statistic; the remaining cells test one level each. One pass of
    quantile fits per block serves every cell.
    """
    yv, zv = _check_pair(y, z)
    cells: List[QuantileCell] = []
    b = n_blocks = 0
    with logfire.span("causality_table", cause=z.name, effect=y.name, levels=len(grid)):
        for order in sorted(set(orders)):
            full, draws, b, n_blocks = _subsample(yv, zv, order, order, grid.levels, True, cfg)
            for key in [None, *grid.levels]:
                cells.append(
                    QuantileCell(
                        lag=order,
                        tau=key,
                        statistic=full[key],
                        p_value=float(np.mean(draws[key] >= full[key])),
                        mean_subsample_statistic=float(np.mean(draws[key])),
                    )
                )
            logfire.info(
                "Quantile causality lag done",
                cause=z.name,
                effect=y.name,
                lag=order,
                joint_p=cells[-len(grid) - 1].p_value,
            )
    return CausalityQuantileResult(
        cause=z.name,
        effect=y.name,
        grid_kind=grid.kind,
        joint_interval=grid.interval,
        block_size=b,
        n_blocks=n_blocks,
        cells=cells,
    )


def _moving_block_rows(n: int, block: int, rng: np.random.Generator) -> np.ndarray:
    n_draw = int(math.ceil(n / block))
    starts = rng.integers(0, n - block + 1, size=n_draw)
    return (starts[:, None] + np.arange(block)[None, :]).ravel()[:n]


def augmented_qar(
    y: Series,
    z: Series,
    grid: QuantileGrid,
    n_boot: int = 200,
    seed: int = 0,
    order: int = 3,
) -> Dict[float, AugmentedQarCoefficient]:
    """
    Coefficient on z_{t-1} in a QAR(order) of y augmented with that regressor.

    Bands are beta +/- 1.96 se, where se is the standard deviation of the coefficient
    over moving-block bootstrap resamples of the regression rows (block length
    floor(T^(1/3))). A rank-deficient design is flagged as collinear and yields NaN
    values instead of an error.
    """
    yv, zv = _check_pair(y, z)
    needed = 10 * (order + 2)
    if len(yv) < needed:
        raise TooShort(f"{y.name}: augmented QAR({order}) needs at least {needed} observations")
    start = order
    X = np.hstack(
        [np.ones((len(yv) - start, 1)), _lag_matrix(yv, order, start), _lag_matrix(zv, 1, start)]
    )
    target = yv[start:]

    if np.linalg.matrix_rank(X) < X.shape[1]:
        logfire.warn("Augmented QAR design is collinear", cause=z.name, effect=y.name)
        nan = float("nan")
        return {
            tau: AugmentedQarCoefficient(
                tau=tau, beta=nan, std_error=nan, lower=nan, upper=nan, collinear=True
            )
            for tau in grid.levels
        }

    beta = np.array([_solve_check_loss(X, target, tau)[-1] for tau in grid.levels])
    n = len(target)
    block = max(1, int(math.floor(n ** (1.0 / 3.0))))
    rng = np.random.default_rng(seed)
    boot = np.empty((n_boot, len(grid)))
    for r in range(n_boot):
        rows = _moving_block_rows(n, block, rng)
        Xb, yb = X[rows], target[rows]
        for j, tau in enumerate(grid.levels):
            boot[r, j] = _solve_check_loss(Xb, yb, tau)[-1]
    se = boot.std(axis=0, ddof=1)

    return {
        tau: AugmentedQarCoefficient(
            tau=tau,
            beta=float(beta[j]),
            std_error=float(se[j]),
            lower=float(beta[j] - BAND_Z * se[j]),
            upper=float(beta[j] + BAND_Z * se[j]),
        )
        for j, tau in enumerate(grid.levels)
    }
