"""
Nonlinearity stage: BDS on each series and on the residuals of each pair's VAR.
"""

from typing import Any, Dict, List

from econometrics.bds import bds_on_var_residuals, bds_test
from econometrics.var_granger import select_lag
from models.config import StageName
from models.schema import BdsResult, Criterion
from stages.base import Stage, StageOutput
from utils.reports import Table


class BdsStage(Stage):
    name = StageName.BDS

    def _table(self, name: str, title: str, labelled: List[tuple], dims: List[int]) -> Table:
        columns = ["Series"]
        for m in dims:
            columns += [f"m={m}", f"p (m={m})"]
        rows = []
        for label, result in labelled:
            row: list = [label]
            for m in dims:
                d = result.per_dimension[m]
                row += [d.statistic, d.p_value]
            rows.append(row)
        return Table(
            name=name,
            title=title,
            columns=columns,
            rows=rows,
            p_value_columns=list(range(2, len(columns), 2)),
            note="Proximity threshold 0.7 standard deviations.",
        )

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        battery = self.config.battery
        dims = list(range(2, battery.bds_max_dim + 1))
        series = state["series"]

        raw: Dict[str, BdsResult] = {name: bds_test(s, dims) for name, s in series.items()}

        residual: List[tuple] = []
        for effect, cause in battery.pairs:
            system = [series[effect], series[cause]]
            lag = battery.granger_lag or select_lag(system, battery.max_lag, Criterion.AIC)
            by_equation = bds_on_var_residuals(system, lag, dims)
            residual.append((f"{effect} | {cause}, VAR({lag})", by_equation[effect]))

        tables = [
            self._table("bds_series", "BDS test on the series", list(raw.items()), dims),
            self._table("bds_var_residuals", "BDS test on VAR residuals", residual, dims),
        ]
        return StageOutput(tables=tables, results={"series": raw, "residuals": dict(residual)})
