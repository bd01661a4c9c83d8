"""
Nonparametric causality stage: Hiemstra-Jones and Diks-Panchenko tests at each lag.
"""

from typing import Any, Dict, List

from econometrics.nonparam_causality import dp_test, hj_test
from models.config import StageName
from models.schema import NonparamCausalityResult
from stages.base import Stage, StageOutput
from utils.reports import Table


class NonparametricStage(Stage):
    name = StageName.NONPARAMETRIC

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        battery = self.config.battery
        series = state["series"]
        rows: List[list] = []
        results: List[NonparamCausalityResult] = []
        for effect, cause in battery.pairs:
            for x, y in ((cause, effect), (effect, cause)):
                for lag in battery.nonparametric_lags:
                    hj = hj_test(series[x], series[y], lag)
                    dp = dp_test(series[x], series[y], lag, bandwidth=battery.dp_bandwidth)
                    results += [hj, dp]
                    rows.append(
                        [f"{x} does not Granger-cause {y}", lag, hj.statistic, hj.p_value, dp.statistic, dp.p_value]
                    )
        dp_rule = (
            "the sample-size rule" if battery.dp_bandwidth == "auto" else f"a bandwidth of {battery.dp_bandwidth:g}"
        )
        table = Table(
            name="nonparametric_causality",
            title="Nonparametric Granger causality",
            columns=["Null hypothesis", "Lag", "HJ statistic", "HJ p-value", "DP statistic", "DP p-value"],
            rows=rows,
            p_value_columns=[3, 5],
            note=f"Series are standardised; HJ uses a bandwidth of 1.5, DP {dp_rule}.",
        )
        return StageOutput(tables=[table], results=results)
