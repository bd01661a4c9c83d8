"""
Pipeline configuration and run manifest.

A PipelineConfig is a single YAML document validated before any compute. Every random
stream of a run is derived from its master seed; the RunManifest records what each stage
wrote, how long it took and which seed it used.
"""

import hashlib
import json
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from econometrics.errors import ConfigError
from models.schema import GridKind, SubsamplingConfig
from models.volatility import MODEL_MENU, Family, McmcConfig, PriorConfig

SCHEMA_VERSION = 1
ARTIFACT_VERSION = "0.1.0"


class StageName(str, Enum):
    """Pipeline stages in a valid execution order."""

    INGEST = "ingest"
    DESCRIBE = "describe"
    UNIT_ROOT = "unit_root"
    BDS = "bds"
    GRANGER = "granger"
    NONPARAMETRIC = "nonparametric"
    QUANTILE = "quantile"
    AUGMENTED_QAR = "augmented_qar"
    VOLATILITY = "volatility"
    MODEL_COMPARISON = "model_comparison"
    VOLATILITY_CAUSALITY = "volatility_causality"
    REPLICATION = "replication"


# Upstream stages each stage reads from. Ingest is implicit for all of them.
STAGE_DEPENDENCIES: Dict[StageName, Tuple[StageName, ...]] = {
    StageName.MODEL_COMPARISON: (StageName.VOLATILITY,),
    StageName.VOLATILITY_CAUSALITY: (StageName.VOLATILITY,),
    StageName.REPLICATION: (StageName.DESCRIBE, StageName.UNIT_ROOT),
}


class ReportFormat(str, Enum):
    MARKDOWN = "markdown"
    CSV = "csv"


class InputConfig(BaseModel):
    """Where the monthly data live and which CSV column feeds which series."""

    path: Path
    date_column: str = "date"
    columns: Dict[str, str] = Field(description="Series name -> CSV column")
    volatility_columns: Dict[str, str] = Field(
        default_factory=dict,
        description="Effect series name -> CSV column holding a ready-made volatility series",
    )

    @field_validator("columns")
    @classmethod
    def _non_empty(cls, v: Dict[str, str]) -> Dict[str, str]:
        if not v:
            raise ValueError("at least one input column is required")
        return v


class TransformConfig(BaseModel):
    """How raw columns become the series the tests see."""

    deflator: Optional[str] = Field(default=None, description="Series used to deflate the prices")
    prices: List[str] = Field(default_factory=list, description="Turned into percentage log returns")
    log_levels: List[str] = Field(default_factory=list, description="Level series taken in natural logs")
    levels: List[str] = Field(default_factory=list, description="Level series used as they are")

    @property
    def outputs(self) -> List[str]:
        return [*self.prices, *self.log_levels, *self.levels]


class BatteryConfig(BaseModel):
    """Which stages run, and on which (effect, cause) pairs."""

    stages: List[StageName] = Field(default_factory=lambda: list(StageName))
    effects: List[str] = Field(min_length=1)
    causes: List[str] = Field(min_length=1)
    granger_lag: Optional[int] = Field(default=None, ge=1, description="Forced VAR lag; AIC when unset")
    max_lag: int = Field(default=12, ge=1)
    bds_max_dim: int = Field(default=6, ge=2, description="BDS embedding dimensions run from 2 to this")
    nonparametric_lags: List[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    dp_bandwidth: Union[float, Literal["auto"]] = Field(
        default=1.5, description="Diks-Panchenko bandwidth; \"auto\" uses the sample-size rule"
    )

    @field_validator("nonparametric_lags")
    @classmethod
    def _positive(cls, v: List[int]) -> List[int]:
        if not v or min(v) < 1:
            raise ValueError("must be a non-empty list of positive integers")
        return v

    @field_validator("dp_bandwidth")
    @classmethod
    def _bandwidth(cls, v: Union[float, str]) -> Union[float, str]:
        if v != "auto" and not v > 0:
            raise ValueError("must be positive or \"auto\"")
        return v

    def selected(self, stage: StageName) -> bool:
        return stage == StageName.INGEST or stage in self.stages

    @property
    def pairs(self) -> List[Tuple[str, str]]:
        """(effect, cause) pairs in configuration order."""
        return [(effect, cause) for effect in self.effects for cause in self.causes]


class QuantileConfig(BaseModel):
    grids: List[GridKind] = Field(default_factory=lambda: [GridKind.DECILES, GridKind.VIGINTILES])
    orders: List[int] = Field(default_factory=lambda: [1, 2, 3])
    augmented_n_boot: int = Field(default=200, ge=10)

    @field_validator("orders")
    @classmethod
    def _orders(cls, v: List[int]) -> List[int]:
        if not v or min(v) < 1 or max(v) > 3:
            raise ValueError("quantile lag orders must lie in 1..3")
        return v


class VolatilityConfig(BaseModel):
    models: List[str] = Field(default_factory=lambda: list(MODEL_MENU))
    source: str = Field(default="SV-MA", description="Model whose volatility feeds the causality tests")
    n_is_draws: int = Field(default=2000, ge=100)
    n_inner_draws: int = Field(default=50, ge=10)
    full_cov: bool = False
    in_mean_scale: Literal["h", "exp_h"] = "h"
    variance_init: Literal["unconditional", "sample"] = "unconditional"

    @field_validator("models")
    @classmethod
    def _known(cls, v: List[str]) -> List[str]:
        unknown = [m for m in v if m not in MODEL_MENU]
        if unknown:
            raise ValueError(f"unknown volatility models {unknown}; choose from {list(MODEL_MENU)}")
        return v

    @property
    def source_family(self) -> Family:
        return MODEL_MENU[self.source][0]


class OutputConfig(BaseModel):
    directory: Path = Path("output")
    formats: List[ReportFormat] = Field(default_factory=lambda: [ReportFormat.MARKDOWN, ReportFormat.CSV])


class ReplicationConfig(BaseModel):
    """Published values to compare against; the scorecard never fails a run."""

    summary: Dict[str, Dict[str, float]] = Field(
        default_factory=dict, description="Series -> summary statistic name -> published value"
    )
    break_dates: Dict[str, str] = Field(default_factory=dict, description="Series -> YYYY-MM")
    tolerance: float = Field(default=0.02, gt=0.0)


class PipelineConfig(BaseModel):
    """Every knob of a run."""

    model_config = ConfigDict(frozen=True)

    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = Field(ge=0, description="Master seed; there is no wall-clock default")
    input: InputConfig
    transforms: TransformConfig = Field(default_factory=TransformConfig)
    battery: BatteryConfig
    quantile: QuantileConfig = Field(default_factory=QuantileConfig)
    subsampling: SubsamplingConfig = Field(default_factory=SubsamplingConfig)
    mcmc: McmcConfig
    priors: PriorConfig = Field(default_factory=PriorConfig)
    volatility: VolatilityConfig = Field(default_factory=VolatilityConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    replication: Optional[ReplicationConfig] = None

    @model_validator(mode="before")
    @classmethod
    def _seed_sampler(cls, data: Any) -> Any:
        # The sampler seed defaults to the master seed so a config needs only one.
        if isinstance(data, dict) and "seed" in data:
            mcmc = dict(data.get("mcmc") or {})
            mcmc.setdefault("seed", data["seed"])
            data = {**data, "mcmc": mcmc}
        return data

    @model_validator(mode="after")
    def _check_references(self) -> "PipelineConfig":
        known = set(self.input.columns)
        t = self.transforms
        for name in [*t.outputs, *([t.deflator] if t.deflator else [])]:
            if name not in known:
                raise ValueError(f"transform references {name!r}, which is not an input column")
        series = set(t.outputs)
        for name in [*self.battery.effects, *self.battery.causes]:
            if name not in series:
                raise ValueError(f"battery references {name!r}, which no transform produces")
        for name in self.input.volatility_columns:
            if name not in self.battery.effects:
                raise ValueError(f"volatility column given for {name!r}, which is not an effect")
        if self.subsampling.k < 1.0:
            raise ValueError("subsampling k must be at least 1")

        battery = self.battery
        fits = battery.selected(StageName.VOLATILITY)
        if battery.selected(StageName.MODEL_COMPARISON) and not fits:
            raise ValueError("model_comparison needs the volatility stage")
        if battery.selected(StageName.VOLATILITY_CAUSALITY) and not fits:
            missing = [e for e in battery.effects if e not in self.input.volatility_columns]
            if missing:
                raise ValueError(
                    f"volatility_causality needs the volatility stage or supplied volatility for {missing}"
                )
        if battery.selected(StageName.REPLICATION):
            for upstream in STAGE_DEPENDENCIES[StageName.REPLICATION]:
                if not battery.selected(upstream):
                    raise ValueError(f"replication needs the {upstream.value} stage")
        if fits and self.volatility.source not in self.volatility.models:
            raise ValueError(f"volatility source {self.volatility.source!r} is not among the fitted models")
        return self

    def config_hash(self) -> str:
        """
        SHA-256 of the canonical JSON form with the input file's bytes in place of its path.

        Paths are left out so the hash does not depend on the machine or on where the
        outputs go.
        """
        payload = self.model_dump(mode="json", exclude={"input": {"path"}, "output": {"directory"}})
        try:
            payload["input"]["sha256"] = hashlib.sha256(self.input.path.read_bytes()).hexdigest()
        except OSError:
            payload["input"]["sha256"] = None
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def dependencies(self, stage: StageName) -> Tuple[StageName, ...]:
        """Selected upstream stages of ``stage``; ingest when it reads nothing else."""
        if stage == StageName.INGEST:
            return ()
        upstream = tuple(s for s in STAGE_DEPENDENCIES.get(stage, ()) if self.battery.selected(s))
        return upstream or (StageName.INGEST,)

    @property
    def stages(self) -> List[StageName]:
        return [s for s in StageName if self.battery.selected(s)]


def stage_seed(master: int, key: str) -> int:
    """
    A 63-bit seed for one named random stream.

    The stream is keyed by a digest of ``key`` rather than by position, so adding or
    removing other streams never changes this one.
    """
    digest = int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    state = np.random.SeedSequence([master, digest]).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1] & 0x7FFFFFFF) << 32)


def load_config(path: Path) -> PipelineConfig:
    """Read and validate a YAML pipeline config; every failure becomes ConfigError."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    try:
        config = PipelineConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config {path}:\n{e}") from e
    if not config.input.path.is_absolute():
        # Input paths are read relative to the config file.
        resolved = (Path(path).parent / config.input.path).resolve()
        config = config.model_copy(update={"input": config.input.model_copy(update={"path": resolved})})
    return config


class StageStatus(str, Enum):
    SUCCEEDED = "SUCCEEDED"
    FAILED = "FAILED"
    SKIPPED = "SKIPPED"


class StageRecord(BaseModel):
    """What one stage did during a run."""

    stage: StageName
    status: StageStatus
    wall_time_ms: float = 0.0
    tables: List[str] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list, description="Paths relative to the output directory")
    seed: Optional[int] = None
    error_type: Optional[str] = None
    error_message: Optional[str] = None
    warnings: List[str] = Field(default_factory=list)


class RunManifest(BaseModel):
    """Index of a pipeline run."""

    config_hash: str
    artifact_version: str = ARTIFACT_VERSION
    schema_version: int = SCHEMA_VERSION
    seed: int
    stages: Dict[str, StageRecord]
    file_hashes: Dict[str, str] = Field(default_factory=dict, description="Relative path -> SHA-256")

    @property
    def failed(self) -> List[str]:
        return [name for name, r in self.stages.items() if r.status == StageStatus.FAILED]

    @property
    def tables(self) -> List[str]:
        return [t for r in self.stages.values() for t in r.tables]

    @property
    def seeds(self) -> Dict[str, int]:
        return {name: r.seed for name, r in self.stages.items() if r.seed is not None}

    def content_hash(self) -> str:
        """Hash of everything except wall times, so reruns can be compared."""
        payload = self.model_dump(mode="json")
        for record in payload["stages"].values():
            record.pop("wall_time_ms")
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def write(self, directory: Path) -> Path:
        path = Path(directory) / "manifest.json"
        text = json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        return path


class DgpConfig(BaseModel):
    """A data-generating process for the ``simulate`` subcommand."""

    model: str
    params: Dict[str, float] = Field(default_factory=dict)
    length: int = Field(ge=10)
    seed: int = Field(ge=0)
    start: str = "1981-01"
    column: str = "returns"
    in_mean_scale: Literal["h", "exp_h"] = "h"

    @field_validator("model")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in MODEL_MENU:
            raise ValueError(f"unknown model {v!r}; choose from {list(MODEL_MENU)}")
        return v


def load_dgp(path: Path) -> DgpConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        return DgpConfig.model_validate(raw)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot read DGP spec {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"invalid DGP spec {path}:\n{e}") from e
