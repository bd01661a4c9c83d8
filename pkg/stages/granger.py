"""
Linear Granger causality stage.
"""

from typing import Any, Dict, List

from econometrics.var_granger import granger_table
from models.config import StageName
from models.schema import Criterion, GrangerTestResult
from stages.base import Stage, StageOutput
from utils.reports import Table


class GrangerStage(Stage):
    """Wald tests in both directions for every (effect, cause) pair."""

    name = StageName.GRANGER

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        battery = self.config.battery
        series = state["series"]
        results: List[GrangerTestResult] = []
        for effect, cause in battery.pairs:
            results += granger_table(
                [series[effect], series[cause]],
                [(cause, effect), (effect, cause)],
                lags=battery.granger_lag,
                max_p=battery.max_lag,
                criterion=Criterion.AIC,
            )
        lag_rule = f"forced to {battery.granger_lag}" if battery.granger_lag else "chosen by AIC"
        table = Table(
            name="linear_granger",
            title="Linear Granger causality",
            columns=["Null hypothesis", "Lag", "Chi-sq", "p-value"],
            rows=[[r.null_hypothesis, r.lag, r.chi_sq, r.p_value] for r in results],
            p_value_columns=[3],
            note=f"VAR lag {lag_rule}.",
        )
        return StageOutput(tables=[table], results=results)
