"""
Tests for the replication scorecard.
"""

from pathlib import Path
from types import SimpleNamespace

import pandas as pd
import pytest

from models.config import ReplicationConfig, load_config
from models.schema import SummaryStats
from stages.replication import ReplicationStage

SAMPLE = Path(__file__).resolve().parent.parent / "config" / "sample.yaml"


def _stats(name: str, mean: float) -> SummaryStats:
    return SummaryStats(
        name=name,
        n=443,
        mean=mean,
        median=0.1,
        max=20.0,
        min=-25.0,
        std_dev=8.0,
        skewness=-0.4,
        kurtosis=5.1,
        jarque_bera_stat=120.0,
        jarque_bera_p=0.0,
    )


@pytest.fixture
def state():
    return {
        "results": {
            "describe": {"oil": _stats("oil", 0.101), "gold": _stats("gold", 0.2)},
            "unit_root": {"oil": {"break": SimpleNamespace(break_date=pd.Period("1986-01", "M"))}},
        }
    }


def _stage(**reference) -> ReplicationStage:
    config = load_config(SAMPLE)
    return ReplicationStage(config.model_copy(update={"replication": ReplicationConfig(**reference)}))


def test_scorecard_rows(state):
    stage = _stage(
        summary={"oil": {"mean": 0.1, "kurtosis": 6.0}},
        break_dates={"oil": "1986-01"},
    )
    output = stage.execute(state)
    rows = {row[0]: row for row in output.tables[0].rows}
    assert rows["oil mean"][3] == pytest.approx(0.01)
    assert rows["oil mean"][4] is True
    assert rows["oil kurtosis"][4] is False
    assert rows["oil break date"][1:3] == ["1986-01", "1986-01"]
    assert rows["oil break date"][4] is True
    assert output.results == {"matched": 2, "items": 3}
    assert output.warnings == []


def test_unknown_items_only_warn(state):
    output = _stage(
        summary={"copper": {"mean": 1.0}, "gold": {"sharpe": 0.5, "n": 443}},
        break_dates={"gold": "2001-01"},
    ).execute(state)
    assert output.tables[0].is_empty
    assert len(output.warnings) == 4


def test_no_reference_means_no_table(state):
    output = ReplicationStage(load_config(SAMPLE)).execute(state)
    assert output.tables == []
    assert output.warnings
