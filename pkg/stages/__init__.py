"""Pipeline stage initialization."""

from stages.base import Stage, StageOutput
from stages.bds import BdsStage
from stages.describe import DescribeStage
from stages.granger import GrangerStage
from stages.ingest import IngestStage
from stages.nonparametric import NonparametricStage
from stages.quantile import AugmentedQarStage, QuantileStage, VolatilityCausalityStage
from stages.replication import ReplicationStage
from stages.unit_root import UnitRootStage
from stages.volatility import ModelComparisonStage, VolatilityStage

STAGES = {
    stage.name: stage
    for stage in (
        IngestStage,
        DescribeStage,
        UnitRootStage,
        BdsStage,
        GrangerStage,
        NonparametricStage,
        QuantileStage,
        AugmentedQarStage,
        VolatilityStage,
        ModelComparisonStage,
        VolatilityCausalityStage,
        ReplicationStage,
    )
}

__all__ = ["STAGES", "Stage", "StageOutput"]
