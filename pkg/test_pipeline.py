"""
End-to-end tests of the pipeline and the command line.

The full run is kept small (one pair, short chains, few importance draws) and is run twice
into separate directories so the two trees can be compared byte for byte.
"""

from pathlib import Path

import pytest
import yaml

from econometrics.series_core import load_csv
from flow.graph import run_pipeline
from main import EXIT_CONFIG, EXIT_OK, EXIT_STAGE_FAILURE, main, with_output
from models.config import StageName, StageStatus, load_config

ROOT = Path(__file__).resolve().parent
DATA = ROOT / "data" / "sample_monthly.csv"
GOLDEN = ROOT / "data" / "golden"


def fast_config(output: Path, **battery) -> dict:
    return {
        "schema_version": 1,
        "seed": 20180101,
        "input": {
            "path": str(DATA),
            "date_column": "date",
            "columns": {"oil": "wti", "cpi": "cpi", "pci": "pci"},
        },
        "transforms": {"deflator": "cpi", "prices": ["oil"], "log_levels": ["pci"]},
        "battery": {
            "effects": ["oil"],
            "causes": ["pci"],
            "max_lag": 6,
            "bds_max_dim": 4,
            "nonparametric_lags": [1, 2],
            **battery,
        },
        "quantile": {"grids": ["deciles", "vigintiles"], "orders": [1, 2], "augmented_n_boot": 20},
        "subsampling": {"k": 5.0, "max_blocks": 50},
        "mcmc": {"n_draws": 1000, "burn_in": 200, "chains": 1},
        "volatility": {"models": ["GARCH", "SV-MA"], "source": "SV-MA", "n_is_draws": 100, "n_inner_draws": 10},
        "output": {"directory": str(output), "formats": ["markdown", "csv"]},
    }


def write_config(path: Path, raw: dict) -> Path:
    path.write_text(yaml.safe_dump(raw, sort_keys=False), encoding="utf-8")
    return path


def _files(directory: Path):
    return sorted(p.relative_to(directory).as_posix() for p in directory.rglob("*") if p.is_file())


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("pipeline")
    manifests = []
    for name in ("first", "second"):
        config = load_config(write_config(base / f"{name}.yaml", fast_config(base / name)))
        manifests.append(run_pipeline(config))
    return base, manifests


@pytest.mark.slow
def test_full_run_succeeds(two_runs):
    base, (manifest, _) = two_runs
    assert manifest.failed == []
    assert all(r.status == StageStatus.SUCCEEDED for r in manifest.stages.values())
    assert list(manifest.stages) == [s.value for s in StageName]
    assert len(manifest.tables) >= 8
    for relative, digest in manifest.file_hashes.items():
        assert (base / "first" / relative).is_file(), relative
        assert len(digest) == 64
    assert (base / "first" / "manifest.json").is_file()
    assert (base / "first" / "draws" / "oil" / "SV-MA_draws.csv").is_file()


@pytest.mark.slow
def test_replication_without_reference_only_warns(two_runs):
    _, (manifest, _) = two_runs
    record = manifest.stages["replication"]
    assert record.status == StageStatus.SUCCEEDED
    assert record.tables == []
    assert record.warnings


@pytest.mark.slow
def test_runs_are_reproducible(two_runs):
    base, (first, second) = two_runs
    assert first.config_hash == second.config_hash
    assert first.content_hash() == second.content_hash()
    assert first.file_hashes == second.file_hashes
    files = [f for f in _files(base / "first") if f != "manifest.json"]
    assert files == [f for f in _files(base / "second") if f != "manifest.json"]
    for f in files:
        assert (base / "first" / f).read_bytes() == (base / "second" / f).read_bytes(), f


@pytest.mark.slow
def test_vigintile_table_is_transposed(two_runs):
    base, _ = two_runs
    text = (base / "first" / "quantile_causality_vigintiles.md").read_text(encoding="utf-8")
    header = text.split("\n")[2]
    assert header == "| Pair | Quantile | Lag 1 | Lag 2 |"
    assert "[0.05, 0.95]" in text


@pytest.mark.slow
def test_stage_subset_gives_identical_tables(two_runs, tmp_path):
    base, _ = two_runs
    raw = fast_config(tmp_path / "subset", stages=["ingest", "describe", "granger"])
    manifest = run_pipeline(load_config(write_config(tmp_path / "subset.yaml", raw)))
    assert list(manifest.stages) == ["ingest", "describe", "granger"]
    for name in ("linear_granger.csv", "summary_statistics.csv"):
        assert (tmp_path / "subset" / name).read_bytes() == (base / "first" / name).read_bytes()


def test_tables_match_golden_files(tmp_path):
    """A describe-only run on the toy file reproduces the hand-computed tables byte for byte."""
    config = with_output(load_config(GOLDEN / "levels.yaml"), tmp_path / "golden")
    manifest = run_pipeline(config)
    assert manifest.failed == []

    expected = _files(GOLDEN / "expected")
    assert [f for f in _files(tmp_path / "golden") if f != "manifest.json"] == expected
    for f in expected:
        assert (tmp_path / "golden" / f).read_bytes() == (GOLDEN / "expected" / f).read_bytes(), f


def test_missing_column_fails_ingest_and_skips_the_rest(tmp_path):
    raw = fast_config(tmp_path / "out", stages=["ingest", "describe", "granger"])
    raw["input"]["columns"]["pci"] = "no_such_column"
    config_path = write_config(tmp_path / "broken.yaml", raw)

    manifest = run_pipeline(load_config(config_path))
    ingest = manifest.stages["ingest"]
    assert ingest.status == StageStatus.FAILED
    assert ingest.error_type == "MissingColumn"
    assert "stage ingest" in ingest.error_message
    assert manifest.stages["describe"].status == StageStatus.SKIPPED
    assert manifest.stages["granger"].status == StageStatus.SKIPPED
    assert manifest.tables == []
    assert (tmp_path / "out" / "manifest.json").is_file()

    assert main(["run", str(config_path), "--output", str(tmp_path / "cli")]) == EXIT_STAGE_FAILURE
    assert (tmp_path / "cli" / "manifest.json").is_file()


def test_validate_command(tmp_path):
    good = write_config(tmp_path / "good.yaml", fast_config(tmp_path / "out"))
    assert main(["validate", str(good)]) == EXIT_OK

    raw = fast_config(tmp_path / "out")
    raw["battery"]["effects"] = ["copper"]
    assert main(["validate", str(write_config(tmp_path / "bad.yaml", raw))]) == EXIT_CONFIG
    assert main(["validate", str(tmp_path / "absent.yaml")]) == EXIT_CONFIG


def test_bad_usage_exits_like_argparse():
    assert main([]) == 2


def test_simulate_command(tmp_path):
    target = tmp_path / "sim" / "oil.csv"
    assert main(["simulate", str(ROOT / "config" / "sample_dgp.yaml"), "--output", str(target)]) == EXIT_OK
    series = load_csv(target, {"oil": "oil", "price": "oil_price"})
    assert len(series["oil"]) == 444
    assert str(series["oil"].timestamps[0]) == "1981-01"
    assert (series["price"].values > 0).all()

    bad = tmp_path / "bad_dgp.yaml"
    # persistence above one
    bad.write_text(
        "model: GARCH\nparams: {alpha0: 0.1, alpha1: 0.7, beta1: 0.5}\nlength: 50\nseed: 1\n",
        encoding="utf-8",
    )
    assert main(["simulate", str(bad), "--output", str(tmp_path / "x.csv")]) == EXIT_CONFIG
