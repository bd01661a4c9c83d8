"""
Series ingestion and transformations.

Loads monthly CSV files into validated Series, deflates nominal prices, builds
percentage log returns and computes the descriptive statistics used in the
summary table.
"""

import re
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Union

import logfire
import numpy as np
import pandas as pd
from scipy import stats

from econometrics.errors import (
    DuplicateTimestamp,
    EmptyFile,
    GapInTimestamps,
    LengthMismatch,
    MissingColumn,
    NonpositiveDeflator,
    NonpositiveValue,
    TimestampMismatch,
    TooShort,
    UnparseableCell,
)
from models.schema import Series, SummaryStats

_DATE_PATTERN = re.compile(r"^\s*(\d{4})-(\d{1,2})(?:-(\d{1,2}))?\s*$")
_NUMBER_PATTERN = re.compile(r"^\s*[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?\s*$")


def _parse_period(raw: str, row: int, column: str) -> pd.Period:
    match = _DATE_PATTERN.match(str(raw))
    if not match:
        raise UnparseableCell(row, column, raw)
    year, month = int(match.group(1)), int(match.group(2))
    day = int(match.group(3) or 1)
    try:
        # Rejects impossible calendar days such as 2017-02-31.
        stamp = pd.Timestamp(year=year, month=month, day=day)
    except ValueError as exc:
        raise UnparseableCell(row, column, raw) from exc
    return stamp.to_period("M")


def _parse_value(raw: str, row: int, column: str) -> float:
    # Decimal point only; thousands separators and locale formats are rejected.
    if raw is None or not _NUMBER_PATTERN.match(str(raw)):
        raise UnparseableCell(row, column, raw)
    return float(raw)


def load_csv(
    path: Union[str, Path],
    schema: Mapping[str, str],
    date_column: str = "date",
) -> Dict[str, Series]:
    """
    Load monthly series from a CSV file.

    Args:
        path: CSV file with a header row.
        schema: Mapping of series name to source column.
        date_column: Column holding YYYY-MM or YYYY-MM-DD dates.

    Returns:
        Series keyed by name, sorted by period.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise EmptyFile(f"{path} is empty") from exc
    if frame.empty:
        raise EmptyFile(f"{path} has no data rows")

    missing = [c for c in [date_column, *schema.values()] if c not in frame.columns]
    if missing:
        raise MissingColumn(missing[0])

    # Row numbers refer to the file, header included.
    periods: List[pd.Period] = [
        _parse_period(raw, i + 2, date_column) for i, raw in enumerate(frame[date_column])
    ]
    seen: Dict[pd.Period, int] = {}
    for p in periods:
        if p in seen:
            raise DuplicateTimestamp(p)
        seen[p] = 1

    order = np.argsort(np.array([p.ordinal for p in periods]), kind="stable")
    index = pd.PeriodIndex([periods[i] for i in order], freq="M")
    steps = np.diff(index.asi8)
    if np.any(steps != 1):
        k = int(np.flatnonzero(steps != 1)[0])
        raise GapInTimestamps(index[k], index[k + 1])

    result: Dict[str, Series] = {}
    for name, column in schema.items():
        raw_values = frame[column].tolist()
        values = np.array([_parse_value(raw_values[i], i + 2, column) for i in order])
        result[name] = Series(name=name, timestamps=index, values=values)

    logfire.info(
        "Loaded series from CSV",
        path=str(path),
        series=list(result),
        nobs=len(index),
        first=str(index[0]),
        last=str(index[-1]),
    )
    return result


def _check_aligned(a: Series, b: Series) -> None:
    if len(a) != len(b) or not a.timestamps.equals(b.timestamps):
        raise TimestampMismatch(f"{a.name} and {b.name} do not share timestamps")


def _check_positive(s: Series) -> None:
    bad = np.flatnonzero(s.values <= 0)
    if bad.size:
        i = int(bad[0])
        raise NonpositiveValue(s.name, i, float(s.values[i]))


def deflate(nominal: Series, cpi: Series) -> Series:
    """
    Convert a nominal price into real terms, real_t = 100 * nominal_t / cpi_t.

    The price index is read as 100 in its base period, so real prices are quoted in
    base-period money.
    """
    _check_aligned(nominal, cpi)
    bad = np.flatnonzero(cpi.values <= 0)
    if bad.size:
        i = int(bad[0])
        raise NonpositiveDeflator(i, float(cpi.values[i]))
    real = 100.0 * nominal.values / cpi.values
    return Series(name=f"{nominal.name}_real", timestamps=nominal.timestamps, values=real)


def log_returns(s: Series) -> Series:
    """Percentage log returns r_t = 100 * (ln s_t - ln s_{t-1}), stamped at t."""
    if len(s) < 2:
        raise TooShort(f"{s.name} needs at least two observations for returns")
    _check_positive(s)
    r = 100.0 * np.diff(np.log(s.values))
    return Series(name=f"{s.name}_ret", timestamps=s.timestamps[1:], values=r)


def log_level(s: Series) -> Series:
    """Natural log of a positive level series."""
    _check_positive(s)
    return Series(name=f"{s.name}_log", timestamps=s.timestamps, values=np.log(s.values))


def align(series: Sequence[Series]) -> List[Series]:
    """Trim every series to the periods common to all of them."""
    if not series:
        return []
    start = max(s.timestamps[0] for s in series)
    end = min(s.timestamps[-1] for s in series)
    if start > end:
        raise TimestampMismatch("series share no common periods")
    return [s.window(start, end) for s in series]


def describe(s: Series) -> SummaryStats:
    """Location, dispersion, skewness, raw kurtosis and the Jarque-Bera normality test."""
    if len(s) < 4:
        raise TooShort(f"{s.name} needs at least four observations")
    x = np.asarray(s.values)
    if np.ptp(x) == 0.0:
        # Higher moments are undefined for a constant series; report them as normal.
        skewness, kurtosis = 0.0, 3.0
    else:
        skewness = float(stats.skew(x, bias=True))
        kurtosis = float(stats.kurtosis(x, fisher=False, bias=True))
    n = len(x)
    jb = n / 6.0 * (skewness**2 + (kurtosis - 3.0) ** 2 / 4.0)
    return SummaryStats(
        name=s.name,
        n=n,
        mean=float(np.mean(x)),
        median=float(np.median(x)),
        max=float(np.max(x)),
        min=float(np.min(x)),
        std_dev=float(np.std(x, ddof=1)),
        skewness=skewness,
        kurtosis=kurtosis,
        jarque_bera_stat=float(jb),
        jarque_bera_p=float(stats.chi2.sf(jb, 2)),
    )


def spearman(a: Series, b: Series) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(a) != len(b):
        raise LengthMismatch(f"{a.name} has {len(a)} observations, {b.name} has {len(b)}")
    _check_aligned(a, b)
    if len(a) < 3:
        raise TooShort("rank correlation needs at least three observations")
    constant = [s.name for s in (a, b) if np.ptp(s.values) == 0.0]
    if constant:
        logfire.warn("Rank correlation undefined for constant series", series=constant)
        return float("nan")
    rho = stats.spearmanr(a.values, b.values).statistic
    return float(rho)
