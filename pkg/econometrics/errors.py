"""
Error hierarchy for the causality toolkit.

Every failure raised by the numerical modules derives from CausalityToolkitError so
that pipeline stages can catch one base class, record the failure in the run manifest
and keep the remaining stages running.
"""

from typing import Any, Optional


class CausalityToolkitError(Exception):
    """Base class for all toolkit errors."""


# Ingestion and transformation


class EmptyFile(CausalityToolkitError):
    """The input CSV holds no data rows."""


class UnparseableCell(CausalityToolkitError):
    """A date or value cell could not be parsed."""

    def __init__(self, row: int, column: str, raw: Any) -> None:
        self.row = row
        self.column = column
        self.raw = raw
        super().__init__(f"Cannot parse cell at row {row}, column {column!r}: {raw!r}")


class DuplicateTimestamp(CausalityToolkitError):
    """The same period appears twice in the input."""

    def __init__(self, period: Any) -> None:
        self.period = period
        super().__init__(f"Duplicate timestamp {period}")


class MissingColumn(CausalityToolkitError):
    """A column named in the schema is absent from the file."""

    def __init__(self, column: str, stage: Optional[str] = None) -> None:
        self.column = column
        self.stage = stage
        where = f" (stage {stage})" if stage else ""
        super().__init__(f"Missing column {column!r}{where}")


class GapInTimestamps(CausalityToolkitError):
    """Consecutive observations are not consecutive months."""

    def __init__(self, before: Any, after: Any) -> None:
        self.before = before
        self.after = after
        super().__init__(f"Gap in timestamps between {before} and {after}")


class TimestampMismatch(CausalityToolkitError):
    """Two series that must share timestamps do not."""


class LengthMismatch(CausalityToolkitError):
    """Two series that must have equal length do not."""


class NonpositiveDeflator(CausalityToolkitError):
    """The price index used for deflation is not strictly positive."""

    def __init__(self, index: int, value: float) -> None:
        self.index = index
        self.value = value
        super().__init__(f"Deflator has nonpositive value {value} at position {index}")


class NonpositiveValue(CausalityToolkitError):
    """A price or index level that must be positive is not."""

    def __init__(self, name: str, index: int, value: float) -> None:
        self.name = name
        self.index = index
        self.value = value
        super().__init__(f"Series {name!r} has nonpositive value {value} at position {index}")


class TooShort(CausalityToolkitError):
    """The sample is too short for the requested procedure."""


class UnknownVariable(CausalityToolkitError):
    """A variable name does not belong to the fitted system."""


# Estimation


class SingularRegression(CausalityToolkitError):
    """A test regression has a singular design."""


class SingularDesign(CausalityToolkitError):
    """The VAR design matrix is rank deficient."""


class DegenerateEpsilon(CausalityToolkitError):
    """The BDS proximity threshold makes every pair close or none close."""


class DegenerateDistances(CausalityToolkitError):
    """A nonparametric causality statistic has a vanishing denominator."""


class NonConvergence(CausalityToolkitError):
    """A quantile regression linear program did not reach an optimum."""

    def __init__(self, tau: float, message: str = "") -> None:
        self.tau = tau
        super().__init__(f"Quantile regression did not converge at tau={tau}: {message}")


class BlockTooShort(CausalityToolkitError):
    """Subsampling blocks are too short or too few."""


class InvalidParams(CausalityToolkitError):
    """Parameters violate positivity or stationarity constraints."""


class NumericalUnderflow(CausalityToolkitError):
    """A per-observation log-density fell below the floor."""


class ChainDivergence(CausalityToolkitError):
    """An MCMC chain failed to move or left the support."""


class ModeSearchFailure(CausalityToolkitError):
    """Newton iterations for the latent-state mode did not converge."""

    def __init__(self, iterations: int, gradient_norm: Optional[float] = None) -> None:
        self.iterations = iterations
        self.gradient_norm = gradient_norm
        super().__init__(
            f"Mode search failed after {iterations} iterations (gradient norm {gradient_norm})"
        )


class DegenerateWeights(CausalityToolkitError):
    """Importance weights collapse onto a handful of draws."""

    def __init__(self, ess: float, n_draws: int) -> None:
        self.ess = ess
        self.n_draws = n_draws
        super().__init__(f"Effective sample size {ess:.1f} of {n_draws} draws")


class EmptyFit(CausalityToolkitError):
    """A posterior fit carries no stored latent paths."""


class DataMismatch(CausalityToolkitError):
    """Estimates being compared were computed on different data."""


class EmptyEstimates(CausalityToolkitError):
    """No estimates were supplied for ranking."""


# Pipeline


class ConfigError(CausalityToolkitError):
    """The pipeline configuration is invalid or inconsistent."""


class StageFailure(CausalityToolkitError):
    """A pipeline stage raised; the cause is attached."""

    def __init__(self, stage: str, cause: BaseException) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stage {stage!r} failed: {type(cause).__name__}: {cause}")


class ReportIoError(CausalityToolkitError):
    """A report file could not be written."""
