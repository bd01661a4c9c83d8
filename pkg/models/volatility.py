"""
Schema definitions for the GARCH and stochastic volatility model menu.

A VolatilityModelSpec names one of the fourteen variants; parameter records carry the
natural-scale values of a draw; PosteriorDraws and MarginalLikelihoodEstimate are the
outputs of estimation and model comparison.
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from econometrics.errors import InvalidParams


class Family(str, Enum):
    """Volatility model family."""

    GARCH = "GARCH"
    SV = "SV"


class Feature(str, Enum):
    """Departures from the baseline GARCH(1,1) or SV model."""

    JUMP = "jump"
    IN_MEAN = "in_mean"
    MA1 = "ma1"
    STUDENT_T = "student_t"
    LEVERAGE = "leverage"


def _entry(family: Family, lags: int = 1, *features: Feature) -> Tuple[Family, int, FrozenSet[Feature]]:
    return family, lags, frozenset(features)


# Every named model toggles at most one thing off its family's baseline.
MODEL_MENU: Dict[str, Tuple[Family, int, FrozenSet[Feature]]] = {
    "GARCH": _entry(Family.GARCH),
    "GARCH-2": _entry(Family.GARCH, 2),
    "GARCH-J": _entry(Family.GARCH, 1, Feature.JUMP),
    "GARCH-M": _entry(Family.GARCH, 1, Feature.IN_MEAN),
    "GARCH-MA": _entry(Family.GARCH, 1, Feature.MA1),
    "GARCH-t": _entry(Family.GARCH, 1, Feature.STUDENT_T),
    "GARCH-GJR": _entry(Family.GARCH, 1, Feature.LEVERAGE),
    "SV": _entry(Family.SV),
    "SV-2": _entry(Family.SV, 2),
    "SV-J": _entry(Family.SV, 1, Feature.JUMP),
    "SV-M": _entry(Family.SV, 1, Feature.IN_MEAN),
    "SV-MA": _entry(Family.SV, 1, Feature.MA1),
    "SV-t": _entry(Family.SV, 1, Feature.STUDENT_T),
    "SV-L": _entry(Family.SV, 1, Feature.LEVERAGE),
}


class VolatilityModelSpec(BaseModel):
    """One model of the menu."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(description="Menu name", examples=["GARCH-t", "SV-MA"])
    family: Family
    variance_lags: int = Field(ge=1, le=2)
    features: FrozenSet[Feature] = frozenset()

    @model_validator(mode="after")
    def _check_menu(self) -> "VolatilityModelSpec":
        if self.name not in MODEL_MENU:
            raise ValueError(f"unknown model {self.name!r}; choose from {list(MODEL_MENU)}")
        if MODEL_MENU[self.name] != (self.family, self.variance_lags, self.features):
            raise ValueError(f"{self.name} does not match its menu definition")
        return self

    @classmethod
    def from_name(cls, name: str) -> "VolatilityModelSpec":
        if name not in MODEL_MENU:
            raise ValueError(f"unknown model {name!r}; choose from {list(MODEL_MENU)}")
        family, lags, features = MODEL_MENU[name]
        return cls(name=name, family=family, variance_lags=lags, features=features)

    def has(self, feature: Feature) -> bool:
        return feature in self.features

    @property
    def param_names(self) -> List[str]:
        """Natural-scale parameter names in storage order."""
        if self.family == Family.GARCH:
            names = ["mu", "alpha0", "alpha1", "beta1"]
            if self.variance_lags == 2:
                names.append("beta2")
            if self.has(Feature.LEVERAGE):
                names.append("gamma")
        else:
            names = ["mu", "mu_h", "phi"]
            if self.variance_lags == 2:
                names.append("phi2")
            names.append("sigma_h")
            if self.has(Feature.LEVERAGE):
                names.append("rho")
        if self.has(Feature.MA1):
            names.append("psi")
        if self.has(Feature.STUDENT_T):
            names.append("nu")
        if self.has(Feature.IN_MEAN):
            names.append("lam")
        if self.has(Feature.JUMP):
            names.extend(["kappa", "mu_j", "sigma_j"])
        return names


class GarchParams(BaseModel):
    """Natural-scale GARCH-family parameters; unused features keep their neutral value."""

    model_config = ConfigDict(frozen=True)

    mu: float = 0.0
    alpha0: float
    alpha1: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    gamma: float = 0.0
    psi: float = 0.0
    nu: Optional[float] = None
    lam: float = 0.0
    kappa: float = 0.0
    mu_j: float = 0.0
    sigma_j: float = 1.0

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1 + self.beta2 + 0.5 * self.gamma

    def validate_for(self, spec: VolatilityModelSpec) -> "GarchParams":
        """Raise InvalidParams unless the values are admissible for ``spec``."""
        problems = []
        if not self.alpha0 > 0.0:
            problems.append("alpha0 must be positive")
        if min(self.alpha1, self.beta1, self.beta2, self.gamma) < 0.0:
            problems.append("variance coefficients must be nonnegative")
        if not self.persistence < 1.0:
            problems.append(f"persistence {self.persistence:.4g} violates covariance stationarity")
        if not -1.0 < self.psi < 1.0:
            problems.append("psi must lie in (-1, 1)")
        if spec.has(Feature.STUDENT_T) and not (self.nu is not None and self.nu > 2.0):
            problems.append("nu must exceed 2")
        if not 0.0 <= self.kappa < 1.0:
            problems.append("kappa must lie in [0, 1)")
        if not self.sigma_j > 0.0:
            problems.append("sigma_j must be positive")
        if problems:
            raise InvalidParams(f"{spec.name}: " + "; ".join(problems))
        return self


class SvParams(BaseModel):
    """Natural-scale stochastic volatility parameters."""

    model_config = ConfigDict(frozen=True)

    mu: float = 0.0
    mu_h: float = 0.0
    phi: float = 0.9
    phi2: float = 0.0
    sigma_h: float = 0.2
    psi: float = 0.0
    nu: Optional[float] = None
    rho: float = 0.0
    lam: float = 0.0
    kappa: float = 0.0
    mu_j: float = 0.0
    sigma_j: float = 1.0

    def validate_for(self, spec: VolatilityModelSpec, allow_zero_scale: bool = False) -> "SvParams":
        """Raise InvalidParams unless admissible; simulation may switch the state noise off."""
        problems = []
        # AR(2) stationarity triangle; phi2 = 0 reduces it to |phi| < 1.
        if not (abs(self.phi2) < 1.0 and self.phi + self.phi2 < 1.0 and self.phi2 - self.phi < 1.0):
            problems.append("state autoregression is not stationary")
        if not (self.sigma_h > 0.0 or (allow_zero_scale and self.sigma_h == 0.0)):
            problems.append("sigma_h must be positive")
        if not -1.0 < self.psi < 1.0:
            problems.append("psi must lie in (-1, 1)")
        if not -1.0 < self.rho < 1.0:
            problems.append("rho must lie in (-1, 1)")
        if spec.has(Feature.STUDENT_T) and not (self.nu is not None and self.nu > 2.0):
            problems.append("nu must exceed 2")
        if not 0.0 <= self.kappa < 1.0:
            problems.append("kappa must lie in [0, 1)")
        if not self.sigma_j > 0.0:
            problems.append("sigma_j must be positive")
        if problems:
            raise InvalidParams(f"{spec.name}: " + "; ".join(problems))
        return self


VolatilityParams = Union[GarchParams, SvParams]


def params_from_vector(spec: VolatilityModelSpec, values) -> VolatilityParams:
    """Build the parameter record of ``spec`` from values in ``spec.param_names`` order."""
    record = {name: float(v) for name, v in zip(spec.param_names, values)}
    if spec.family == Family.GARCH:
        return GarchParams(**record)
    return SvParams(**record)


def data_fingerprint(y: np.ndarray) -> str:
    """SHA-256 of the float64 bytes of the data."""
    return hashlib.sha256(np.ascontiguousarray(y, dtype="<f8").tobytes()).hexdigest()


class PosteriorDraws(BaseModel):
    """Post burn-in MCMC output for one model."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: VolatilityModelSpec
    names: List[str]
    draws: np.ndarray = Field(description="n_draws x n_params, natural scale")
    chain: np.ndarray = Field(description="Chain index of each draw")
    acceptance_rates: Dict[str, float] = Field(description="Per sampler block")
    rhat: Dict[str, float] = Field(default_factory=dict, description="Potential scale reduction")
    seed: int
    data_fingerprint: str
    paths: Optional[np.ndarray] = Field(
        default=None, description="Thinned latent log-variance paths (SV only), n_paths x T"
    )
    timestamps: Optional[pd.PeriodIndex] = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "PosteriorDraws":
        if self.draws.ndim != 2 or self.draws.shape[1] != len(self.names):
            raise ValueError("draws must have one column per parameter name")
        if len(self.chain) != len(self.draws):
            raise ValueError("one chain index per draw")
        return self

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    def posterior_mean(self) -> Dict[str, float]:
        return dict(zip(self.names, self.draws.mean(axis=0).tolist()))

    def to_files(self, directory: Union[str, Path]) -> List[Path]:
        """Write draws as CSV with a JSON sidecar, plus the latent paths when present."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        stem = self.spec.name
        frame = pd.DataFrame(self.draws, columns=self.names)
        frame.insert(0, "chain", self.chain)
        draws_path = directory / f"{stem}_draws.csv"
        frame.to_csv(draws_path, index=False, lineterminator="\n", float_format="%.17g")
        written = [draws_path]
        sidecar = {
            "spec": self.spec.name,
            "names": self.names,
            "acceptance_rates": self.acceptance_rates,
            "rhat": self.rhat,
            "seed": self.seed,
            "data_fingerprint": self.data_fingerprint,
            "n_draws": self.n_draws,
        }
        if self.paths is not None:
            paths_path = directory / f"{stem}_paths.csv"
            pd.DataFrame(self.paths).to_csv(
                paths_path, index=False, lineterminator="\n", float_format="%.17g"
            )
            written.append(paths_path)
            sidecar["paths_file"] = paths_path.name
        if self.timestamps is not None:
            sidecar["first_period"] = str(self.timestamps[0])
            sidecar["n_periods"] = len(self.timestamps)
        meta_path = directory / f"{stem}_draws.json"
        meta_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(meta_path)
        return written

    @classmethod
    def from_files(cls, directory: Union[str, Path], name: str) -> "PosteriorDraws":
        directory = Path(directory)
        meta = json.loads((directory / f"{name}_draws.json").read_text(encoding="utf-8"))
        frame = pd.read_csv(directory / f"{name}_draws.csv")
        paths = None
        if "paths_file" in meta:
            paths = pd.read_csv(directory / meta["paths_file"]).to_numpy(dtype=float)
        timestamps = None
        if "first_period" in meta:
            timestamps = pd.period_range(meta["first_period"], periods=meta["n_periods"], freq="M")
        return cls(
            spec=VolatilityModelSpec.from_name(meta["spec"]),
            names=meta["names"],
            draws=frame[meta["names"]].to_numpy(dtype=float),
            chain=frame["chain"].to_numpy(dtype=int),
            acceptance_rates=meta["acceptance_rates"],
            rhat=meta["rhat"],
            seed=meta["seed"],
            data_fingerprint=meta["data_fingerprint"],
            paths=paths,
            timestamps=timestamps,
        )


class MarginalLikelihoodEstimate(BaseModel):
    """Log marginal likelihood with its numerical standard error."""

    model_config = ConfigDict(frozen=True)

    spec: VolatilityModelSpec
    log_ml: float
    nse: float = Field(ge=0.0)
    n_is_draws: int = Field(gt=0)
    ess: float
    data_fingerprint: str

    @model_validator(mode="after")
    def _check(self) -> "MarginalLikelihoodEstimate":
        if not np.isfinite(self.nse):
            raise ValueError("nse must be finite")
        if self.ess > self.n_is_draws * (1.0 + 1e-9):
            raise ValueError("ess cannot exceed the number of draws")
        return self


class PriorKind(str, Enum):
    """Scalar prior families; ``a`` and ``b`` are read per family."""

    NORMAL = "normal"  # mean a, variance b
    HALF_NORMAL = "half_normal"  # variance b, on (lower, inf)
    TRUNCATED_NORMAL = "truncated_normal"  # mean a, variance b, on (lower, upper)
    SHIFTED_GAMMA = "shifted_gamma"  # x - lower ~ Gamma(shape a, rate b)
    UNIFORM = "uniform"  # on (lower, upper)
    SCALED_BETA = "scaled_beta"  # (x - lower) / (upper - lower) ~ Beta(a, b)
    INV_GAMMA_SQUARE = "inv_gamma_square"  # x^2 ~ InvGamma(shape a, scale b)


class ScalarPrior(BaseModel):
    """Prior on one natural-scale parameter."""

    model_config = ConfigDict(frozen=True)

    kind: PriorKind
    a: float = 0.0
    b: float = 1.0
    lower: Optional[float] = None
    upper: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "ScalarPrior":
        if self.kind in (PriorKind.UNIFORM, PriorKind.SCALED_BETA):
            if self.lower is None or self.upper is None or not self.lower < self.upper:
                raise ValueError(f"{self.kind.value} prior needs lower < upper")
        if self.kind == PriorKind.TRUNCATED_NORMAL and self.upper is not None:
            if not (0.0 if self.lower is None else self.lower) < self.upper:
                raise ValueError("truncated_normal prior needs lower < upper")
        if self.kind != PriorKind.UNIFORM and self.b <= 0.0:
            raise ValueError(f"{self.kind.value} prior needs b > 0")
        if self.kind in (PriorKind.SHIFTED_GAMMA, PriorKind.SCALED_BETA, PriorKind.INV_GAMMA_SQUARE):
            if self.a <= 0.0:
                raise ValueError(f"{self.kind.value} prior needs a > 0")
        return self


class PersistencePrior(str, Enum):
    """Joint prior on the GARCH coefficients inside the stationarity region."""

    TRUNCATED_NORMAL = "truncated_normal"
    UNIFORM = "uniform"


class PriorConfig(BaseModel):
    """Per-parameter prior overrides; parameters not named keep their defaults."""

    overrides: Dict[str, ScalarPrior] = Field(default_factory=dict)
    persistence: PersistencePrior = PersistencePrior.TRUNCATED_NORMAL
    persistence_variance: float = Field(
        default=1.0, gt=0.0, description="Variance of each coefficient before truncation"
    )


class McmcConfig(BaseModel):
    """Sampler settings shared by the GARCH and SV fits."""

    n_draws: int = Field(default=5000, ge=1000, description="Kept draws per chain")
    burn_in: int = Field(default=2000, ge=0, description="Adaptation iterations per chain")
    thin: int = Field(default=1, ge=1)
    chains: int = Field(default=2, ge=1)
    seed: int = Field(description="Master seed for every chain")
    path_thin: int = Field(default=10, ge=1, description="Store every n-th latent path")
    target_acceptance: float = Field(default=0.234, gt=0.0, lt=1.0)
    min_acceptance: float = Field(default=0.01, ge=0.0, lt=1.0)


class RankingRow(BaseModel):
    """One model in a marginal-likelihood ranking."""

    rank: int = Field(ge=1)
    model: str
    log_ml: float
    nse: float
    log_bf_vs_best: float = Field(description="log Bayes factor against the top model, <= 0")


class RankingTable(BaseModel):
    """Models ordered by log marginal likelihood, best first."""

    series: Optional[str] = None
    rows: List[RankingRow]

    @property
    def best(self) -> str:
        return self.rows[0].model

    def position(self, model: str) -> int:
        return next(r.rank for r in self.rows if r.model == model)
