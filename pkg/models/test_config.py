"""
Tests for pipeline configuration loading, validation and seed derivation.
"""

from pathlib import Path

import pytest
import yaml

from econometrics.errors import ConfigError
from models.config import (
    STAGE_DEPENDENCIES,
    PipelineConfig,
    RunManifest,
    StageName,
    StageRecord,
    StageStatus,
    load_config,
    load_dgp,
    stage_seed,
)
from models.volatility import PersistencePrior

ROOT = Path(__file__).resolve().parent.parent
SAMPLE = ROOT / "config" / "sample.yaml"


def _raw():
    return yaml.safe_load(SAMPLE.read_text(encoding="utf-8"))


def _write(tmp_path, raw, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw), encoding="utf-8")
    return path


def test_sample_config_loads():
    config = load_config(SAMPLE)
    assert config.schema_version == 1
    assert config.input.path == (ROOT / "data" / "sample_monthly.csv").resolve()
    assert config.input.path.exists()
    assert config.mcmc.seed == config.seed
    assert config.volatility.source == "SV-MA"
    assert config.stages[0] == StageName.INGEST
    assert set(config.stages) == set(StageName)
    assert config.battery.pairs == [("oil", "pci"), ("oil", "epu"), ("gold", "pci"), ("gold", "epu")]
    assert config.battery.nonparametric_lags == [1, 2, 3, 4, 5, 6]
    assert config.battery.dp_bandwidth == 1.5
    assert config.priors.persistence == PersistencePrior.TRUNCATED_NORMAL


def test_battery_defaults_cover_six_lags(tmp_path):
    raw = _raw()
    del raw["battery"]["nonparametric_lags"]
    del raw["battery"]["dp_bandwidth"]
    battery = load_config(_write(tmp_path, raw)).battery
    assert battery.nonparametric_lags == [1, 2, 3, 4, 5, 6]
    assert battery.dp_bandwidth == 1.5

    raw["battery"]["dp_bandwidth"] = "auto"
    assert load_config(_write(tmp_path, raw)).battery.dp_bandwidth == "auto"


def test_explicit_sampler_seed_is_kept(tmp_path):
    raw = _raw()
    raw["mcmc"]["seed"] = 99
    assert load_config(_write(tmp_path, raw)).mcmc.seed == 99


def test_seed_is_mandatory(tmp_path):
    raw = _raw()
    del raw["seed"]
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, raw))


@pytest.mark.parametrize(
    "path, value",
    [
        (("schema_version",), 2),
        (("battery", "effects"), ["copper"]),
        (("transforms", "deflator"), "ppi"),
        (("subsampling", "k"), 0.5),
        (("volatility", "models"), ["GARCH", "SV-X"]),
        (("volatility", "source"), "SV-L"),
        (("quantile", "orders"), [1, 4]),
        (("battery", "dp_bandwidth"), -1.0),
        (("battery", "dp_bandwidth"), "silverman"),
    ],
)
def test_invalid_configs_are_rejected(tmp_path, path, value):
    raw = _raw()
    if path == ("volatility", "source"):
        raw["volatility"]["models"] = ["GARCH", "SV-MA"]
    target = raw
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, raw))


def test_volatility_causality_needs_a_volatility_source(tmp_path):
    raw = _raw()
    raw["battery"]["stages"] = ["describe", "volatility_causality"]
    with pytest.raises(ConfigError, match="volatility"):
        load_config(_write(tmp_path, raw))

    raw["input"]["volatility_columns"] = {"oil": "epu", "gold": "epu"}
    config = load_config(_write(tmp_path, raw))
    assert config.dependencies(StageName.VOLATILITY_CAUSALITY) == (StageName.INGEST,)


def test_dependencies_follow_selection():
    config = load_config(SAMPLE)
    assert config.dependencies(StageName.INGEST) == ()
    assert config.dependencies(StageName.GRANGER) == (StageName.INGEST,)
    assert config.dependencies(StageName.MODEL_COMPARISON) == (StageName.VOLATILITY,)
    assert config.dependencies(StageName.REPLICATION) == STAGE_DEPENDENCIES[StageName.REPLICATION]


def test_replication_requires_its_inputs(tmp_path):
    raw = _raw()
    raw["battery"]["stages"] = ["describe", "replication"]
    with pytest.raises(ConfigError, match="unit_root"):
        load_config(_write(tmp_path, raw))


def test_bad_yaml_and_missing_file(tmp_path):
    broken = tmp_path / "broken.yaml"
    broken.write_text("seed: [1, 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(broken)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")
    listing = tmp_path / "list.yaml"
    listing.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(listing)


def test_config_hash_ignores_locations(tmp_path):
    config = load_config(SAMPLE)
    moved = config.model_copy(
        update={"output": config.output.model_copy(update={"directory": tmp_path / "elsewhere"})}
    )
    assert moved.config_hash() == config.config_hash()

    raw = _raw()
    raw["seed"] = raw["seed"] + 1
    assert load_config(_write(tmp_path, raw)).config_hash() != config.config_hash()

    # Same bytes under another name hash the same.
    copy = tmp_path / "copy.csv"
    copy.write_bytes(config.input.path.read_bytes())
    raw = _raw()
    raw["input"]["path"] = str(copy)
    assert load_config(_write(tmp_path, raw)).config_hash() == config.config_hash()


def test_stage_seed_is_keyed_by_name():
    assert stage_seed(7, "quantile") == stage_seed(7, "quantile")
    assert stage_seed(7, "quantile") != stage_seed(7, "granger")
    assert stage_seed(7, "quantile") != stage_seed(8, "quantile")
    assert 0 <= stage_seed(123, "volatility") < 2**63


def test_manifest_content_hash_ignores_wall_time(tmp_path):
    def manifest(ms):
        record = StageRecord(stage=StageName.INGEST, status=StageStatus.SUCCEEDED, wall_time_ms=ms, seed=1)
        return RunManifest(config_hash="abc", seed=1, stages={"ingest": record})

    assert manifest(1.0).content_hash() == manifest(250.0).content_hash()
    failed = RunManifest(
        config_hash="abc",
        seed=1,
        stages={"ingest": StageRecord(stage=StageName.INGEST, status=StageStatus.FAILED)},
    )
    assert failed.failed == ["ingest"]
    path = failed.write(tmp_path)
    assert b"\r\n" not in path.read_bytes()


def test_dgp_spec(tmp_path):
    dgp = load_dgp(ROOT / "config" / "sample_dgp.yaml")
    assert dgp.model == "SV-MA"
    bad = tmp_path / "dgp.yaml"
    bad.write_text("model: ARMA\nlength: 100\nseed: 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_dgp(bad)


def test_pipeline_config_is_frozen():
    config = load_config(SAMPLE)
    with pytest.raises(Exception):
        config.seed = 3
    assert isinstance(config, PipelineConfig)
