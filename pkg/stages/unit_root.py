"""
Stationarity stage: ADF and Phillips-Perron tests with and without trend, and the
one-break unit-root test.
"""

from typing import Any, Dict, List

from econometrics.unit_root import adf_test, perron_break_test, pp_test
from models.config import StageName
from models.schema import Deterministic, UnitRootResult
from stages.base import Stage, StageOutput
from utils.reports import Table, format_value


def _starred(result: UnitRootResult) -> str:
    return f"{format_value(result.statistic)}{result.stars()}"


class UnitRootStage(Stage):
    name = StageName.UNIT_ROOT

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        max_lag = self.config.battery.max_lag
        rows: List[list] = []
        breaks: List[list] = []
        results: Dict[str, Dict[str, UnitRootResult]] = {}
        for name, s in state["series"].items():
            tests = {
                "adf_c": adf_test(s, Deterministic.CONSTANT, max_lag=max_lag),
                "adf_ct": adf_test(s, Deterministic.CONSTANT_TREND, max_lag=max_lag),
                "pp_c": pp_test(s, Deterministic.CONSTANT),
                "pp_ct": pp_test(s, Deterministic.CONSTANT_TREND),
                "break": perron_break_test(s, max_lag=min(max_lag, 8)),
            }
            results[name] = tests
            rows.append(
                [
                    name,
                    _starred(tests["adf_c"]),
                    tests["adf_c"].lag_or_bandwidth,
                    _starred(tests["adf_ct"]),
                    tests["adf_ct"].lag_or_bandwidth,
                    _starred(tests["pp_c"]),
                    _starred(tests["pp_ct"]),
                    tests["pp_ct"].lag_or_bandwidth,
                ]
            )
            brk = tests["break"]
            breaks.append(
                [
                    name,
                    _starred(brk),
                    str(brk.break_date),
                    brk.lag_or_bandwidth,
                    brk.critical_values[0.05],
                ]
            )

        stars = "*, ** and *** denote rejection of the unit root at the 10%, 5% and 1% levels."
        unit_root = Table(
            name="unit_root",
            title="Unit root tests",
            columns=[
                "Series",
                "ADF (c)",
                "ADF lag (c)",
                "ADF (c, t)",
                "ADF lag (c, t)",
                "PP (c)",
                "PP (c, t)",
                "PP bandwidth",
            ],
            rows=rows,
            note=stars,
        )
        structural_break = Table(
            name="structural_break",
            title="Unit root test with a break in intercept and trend",
            columns=["Series", "Statistic", "Break date", "Lag", "5% critical value"],
            rows=breaks,
            note=stars,
        )
        return StageOutput(tables=[unit_root, structural_break], results=results)
