"""
Schema definitions for series and diagnostic results.

This module contains the Pydantic models exchanged between the econometric routines
and the pipeline stages: the monthly Series container, test-option enums and the
result records of the unit-root, BDS, Granger and quantile-causality procedures.
"""

import math
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from econometrics.errors import GapInTimestamps, TimestampMismatch

# Significance level used for every "decision" flag and for bold p-values in reports.
DECISION_LEVEL = 0.10

# Levels at which unit-root decisions are reported, tightest first.
SIGNIFICANCE_LEVELS = (0.01, 0.05, 0.10)


class Frequency(str, Enum):
    """Sampling frequency of a series."""

    MONTHLY = "monthly"


class Deterministic(str, Enum):
    """Deterministic terms in a unit-root regression."""

    CONSTANT = "c"
    CONSTANT_TREND = "ct"


class Criterion(str, Enum):
    """Information criterion used for lag selection."""

    AIC = "aic"
    BIC = "bic"
    SIC = "bic"


class UnitRootTest(str, Enum):
    """Unit-root procedures available in the battery."""

    ADF = "adf"
    PP = "pp"
    PERRON = "perron"


class EpsilonKind(str, Enum):
    """How the BDS proximity threshold is chosen."""

    TIMES_STD = "times_std"
    ABSOLUTE = "absolute"


class GridKind(str, Enum):
    """Named quantile grids."""

    DECILES = "deciles"
    VIGINTILES = "vigintiles"
    CUSTOM = "custom"


class Series(BaseModel):
    """
    An ordered monthly series of finite real observations.

    Timestamps are a pandas monthly PeriodIndex with no gaps and no duplicates.
    The value array is stored read-only so a Series can be shared between stages.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str = Field(description="Variable name", examples=["oil_real", "gold_real"])
    timestamps: pd.PeriodIndex = Field(description="Consecutive monthly periods")
    values: np.ndarray = Field(description="Finite float observations, one per period")
    frequency: Frequency = Field(default=Frequency.MONTHLY, description="Sampling frequency")

    @field_validator("values", mode="before")
    @classmethod
    def _as_float_array(cls, v):
        arr = np.array(v, dtype=float, copy=True).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("series values must be finite")
        arr.setflags(write=False)
        return arr

    @field_validator("timestamps", mode="before")
    @classmethod
    def _as_period_index(cls, v):
        return pd.PeriodIndex(v, freq="M")

    @model_validator(mode="after")
    def _check_shape(self) -> "Series":
        if len(self.values) == 0:
            raise ValueError("series must hold at least one observation")
        if len(self.values) != len(self.timestamps):
            raise ValueError(
                f"{len(self.values)} values but {len(self.timestamps)} timestamps"
            )
        steps = np.diff(self.timestamps.asi8)
        bad = np.flatnonzero(steps != 1)
        if bad.size:
            i = int(bad[0])
            raise GapInTimestamps(self.timestamps[i], self.timestamps[i + 1])
        return self

    @classmethod
    def from_array(cls, name: str, values, start: str = "1900-01") -> "Series":
        """Build a series from raw values with consecutive months starting at ``start``."""
        values = np.asarray(values, dtype=float)
        periods = pd.period_range(start=start, periods=len(values), freq="M")
        return cls(name=name, timestamps=periods, values=values)

    def __len__(self) -> int:
        return len(self.values)

    def rename(self, name: str) -> "Series":
        return Series(name=name, timestamps=self.timestamps, values=self.values)

    def window(self, start: pd.Period, end: pd.Period) -> "Series":
        """Restrict the series to the inclusive period range [start, end]."""
        mask = (self.timestamps >= start) & (self.timestamps <= end)
        if not mask.any():
            raise TimestampMismatch(f"{self.name} has no observations in {start}..{end}")
        return Series(name=self.name, timestamps=self.timestamps[mask], values=self.values[mask])

    def to_pandas(self) -> pd.Series:
        return pd.Series(np.array(self.values), index=self.timestamps, name=self.name)


class SummaryStats(BaseModel):
    """Descriptive statistics of a series."""

    model_config = ConfigDict(frozen=True)

    name: str
    n: int
    mean: float
    median: float
    max: float
    min: float
    std_dev: float = Field(description="Sample standard deviation (n-1 denominator)")
    skewness: float = Field(description="Biased (n-denominator) third standardised moment")
    kurtosis: float = Field(description="Raw fourth standardised moment; 3 under normality")
    jarque_bera_stat: float
    jarque_bera_p: float


class UnitRootResult(BaseModel):
    """Outcome of one unit-root test."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    test: UnitRootTest
    series: str
    deterministic: Deterministic
    statistic: float
    lag_or_bandwidth: int = Field(ge=0, description="Augmentation lags or long-run bandwidth")
    p_value: Optional[float] = Field(default=None, description="Absent for the break test")
    critical_values: Dict[float, float] = Field(description="Significance level to critical value")
    reject_at: FrozenSet[float] = Field(description="Levels from {0.01, 0.05, 0.10} at which H0 is rejected")
    break_date: Optional[pd.Period] = Field(default=None, description="Break test only")

    @model_validator(mode="after")
    def _check_consistency(self) -> "UnitRootResult":
        if not self.reject_at <= set(SIGNIFICANCE_LEVELS):
            raise ValueError(f"reject_at must be drawn from {SIGNIFICANCE_LEVELS}")
        for tight, loose in zip(SIGNIFICANCE_LEVELS, SIGNIFICANCE_LEVELS[1:]):
            if tight in self.reject_at and loose not in self.reject_at:
                raise ValueError("reject_at must be downward consistent")
        if (self.break_date is not None) != (self.test == UnitRootTest.PERRON):
            raise ValueError("break_date is reported by the break test only")
        return self

    def stars(self) -> str:
        return "*" * len(self.reject_at)


class EpsilonRule(BaseModel):
    """Proximity threshold for correlation integrals."""

    model_config = ConfigDict(frozen=True)

    kind: EpsilonKind = EpsilonKind.TIMES_STD
    value: float = Field(default=0.7, gt=0.0)

    def resolve(self, x: np.ndarray) -> float:
        if self.kind == EpsilonKind.ABSOLUTE:
            return float(self.value)
        return float(self.value * np.std(x, ddof=1))


class BdsDimension(BaseModel):
    """BDS statistic at one embedding dimension."""

    model_config = ConfigDict(frozen=True)

    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)


class BdsResult(BaseModel):
    """BDS statistics for a set of embedding dimensions."""

    model_config = ConfigDict(frozen=True)

    series: str
    epsilon: float = Field(gt=0.0)
    per_dimension: Dict[int, BdsDimension] = Field(description="Embedding dimension to statistic")
    n_effective: int = Field(description="Observations entering the test")

    @field_validator("per_dimension")
    @classmethod
    def _contiguous(cls, v: Dict[int, BdsDimension]) -> Dict[int, BdsDimension]:
        if v and sorted(v) != list(range(2, 2 + len(v))):
            raise ValueError("embedding dimensions must be contiguous from 2")
        return v


class GrangerTestResult(BaseModel):
    """Wald test that the lags of ``cause`` drop out of the ``effect`` equation."""

    model_config = ConfigDict(frozen=True)

    cause: str
    effect: str
    lag: int
    chi_sq: float = Field(ge=0.0)
    p_value: float = Field(ge=0.0, le=1.0)
    decision: bool = Field(description="True when p <= 0.10")

    @property
    def null_hypothesis(self) -> str:
        return f"{self.cause} does not Granger-cause {self.effect}"


class NonparamKind(str, Enum):
    """Nonparametric causality test family."""

    HJ = "HJ"
    DP = "DP"


class NonparamCausalityResult(BaseModel):
    """One-sided nonparametric Granger causality statistic."""

    model_config = ConfigDict(frozen=True)

    kind: NonparamKind
    cause: str
    effect: str
    lag: int = Field(description="Common lag length of cause and effect")
    bandwidth: float = Field(gt=0.0)
    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)


class QuantileGrid(BaseModel):
    """Strictly increasing quantile levels inside (0, 1)."""

    model_config = ConfigDict(frozen=True)

    levels: Tuple[float, ...]
    kind: GridKind = GridKind.CUSTOM

    @field_validator("levels")
    @classmethod
    def _check_levels(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("quantile grid must not be empty")
        if any(not (0.0 < t < 1.0) for t in v):
            raise ValueError("quantile levels must lie strictly inside (0, 1)")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("quantile levels must be strictly increasing")
        return tuple(float(t) for t in v)

    @classmethod
    def deciles(cls) -> "QuantileGrid":
        return cls(levels=tuple(round(0.1 * i, 2) for i in range(1, 10)), kind=GridKind.DECILES)

    @classmethod
    def vigintiles(cls) -> "QuantileGrid":
        return cls(levels=tuple(round(0.05 * i, 2) for i in range(1, 20)), kind=GridKind.VIGINTILES)

    @classmethod
    def custom(cls, levels) -> "QuantileGrid":
        return cls(levels=tuple(levels), kind=GridKind.CUSTOM)

    @property
    def interval(self) -> Tuple[float, float]:
        return self.levels[0], self.levels[-1]

    def __len__(self) -> int:
        return len(self.levels)


class QuantileCell(BaseModel):
    """One cell of a quantile causality table."""

    model_config = ConfigDict(frozen=True)

    lag: int
    tau: Optional[float] = Field(default=None, description="None for the joint interval test")
    statistic: float
    p_value: float
    mean_subsample_statistic: float

    @property
    def label(self) -> str:
        return "joint" if self.tau is None else f"{self.tau:g}"


class CausalityQuantileResult(BaseModel):
    """Quantile causality p-values for one (cause, effect) pair across lags."""

    model_config = ConfigDict(frozen=True)

    cause: str
    effect: str
    grid_kind: GridKind
    joint_interval: Tuple[float, float]
    block_size: int
    n_blocks: int
    cells: List[QuantileCell]

    @property
    def lags_tested(self) -> List[int]:
        return sorted({c.lag for c in self.cells})

    @property
    def per_tau(self) -> Dict[int, Dict[float, float]]:
        table: Dict[int, Dict[float, float]] = {}
        for c in self.cells:
            if c.tau is not None:
                table.setdefault(c.lag, {})[c.tau] = c.p_value
        return table

    @property
    def joint(self) -> Dict[int, float]:
        return {c.lag: c.p_value for c in self.cells if c.tau is None}

    @property
    def statistic_values(self) -> Dict[Tuple[int, str], float]:
        return {(c.lag, c.label): c.statistic for c in self.cells}


class AugmentedQarCoefficient(BaseModel):
    """Coefficient on the lagged cause in an augmented QAR(3) at one quantile."""

    model_config = ConfigDict(frozen=True)

    tau: float
    beta: float
    std_error: float
    lower: float
    upper: float
    collinear: bool = False


class QarModel(BaseModel):
    """Quantile autoregression fitted on a grid of quantile levels."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    order: int = Field(ge=1, le=3)
    grid: QuantileGrid
    theta: Dict[float, Tuple[float, ...]] = Field(
        description="Per level: intercept followed by the coefficients on lags 1..order"
    )
    sigma: float = Field(gt=0.0, description="Innovation scale from the median fit")
    fitted_quantiles: np.ndarray = Field(
        description="Rows are fitted periods, columns follow the grid; non-decreasing across columns"
    )
    start: int = Field(description="Index of the first fitted observation in the input series")

    @model_validator(mode="after")
    def _check_grid(self) -> "QarModel":
        if set(self.theta) != set(self.grid.levels):
            raise ValueError("theta must cover every grid level")
        if self.fitted_quantiles.shape[1] != len(self.grid):
            raise ValueError("one fitted column per grid level")
        return self


class SubsamplingConfig(BaseModel):
    """Block subsampling settings for quantile causality p-values."""

    model_config = ConfigDict(frozen=True)

    k: float = Field(default=5.0, gt=0.0, description="Block constant in b = floor(k T^(2/5))")
    seed: int = Field(default=0, ge=0, lt=2**64)
    max_blocks: Optional[int] = Field(
        default=None,
        ge=50,
        description="Evaluate a seeded random subset of this many blocks instead of all of them",
    )

    def block_size(self, nobs: int) -> int:
        return int(math.floor(self.k * nobs ** 0.4))

    def n_blocks(self, nobs: int) -> int:
        return nobs - self.block_size(nobs) + 1
