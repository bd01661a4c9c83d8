"""
Replication scorecard: computed summary statistics and break dates against published ones.

The scorecard is informational; a mismatch is logged and reported, never raised.
"""

from typing import Any, Dict, List

import logfire

from models.config import StageName
from models.schema import SummaryStats
from stages.base import Stage, StageOutput
from utils.reports import Table


class ReplicationStage(Stage):
    name = StageName.REPLICATION

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        reference = self.config.replication
        if reference is None:
            return StageOutput(warnings=["no published values configured"])
        stats: Dict[str, SummaryStats] = state["results"][StageName.DESCRIBE.value]
        unit_root = state["results"][StageName.UNIT_ROOT.value]
        rows: List[list] = []
        warnings: List[str] = []

        for series, published in reference.summary.items():
            if series not in stats:
                warnings.append(f"no summary statistics for {series!r}")
                continue
            computed = stats[series].model_dump()
            for stat, value in published.items():
                if stat not in computed or stat in ("name", "n"):
                    warnings.append(f"unknown summary statistic {stat!r}")
                    continue
                mine = float(computed[stat])
                gap = abs(mine - value) / abs(value) if value != 0.0 else abs(mine)
                rows.append([f"{series} {stat}", mine, value, gap, gap <= reference.tolerance])

        for series, date in reference.break_dates.items():
            if series not in unit_root:
                warnings.append(f"no break test for {series!r}")
                continue
            found = str(unit_root[series]["break"].break_date)
            rows.append([f"{series} break date", found, date, None, found == date])

        matched = sum(1 for r in rows if r[-1])
        logfire.info("Replication scorecard", matched=matched, items=len(rows), warnings=len(warnings))
        table = Table(
            name="replication_scorecard",
            title="Replication scorecard",
            columns=["Item", "Computed", "Published", "Relative gap", "Within tolerance"],
            rows=rows,
            note=f"Summary statistics match within {reference.tolerance:.0%}; break dates must match exactly.",
        )
        return StageOutput(tables=[table], warnings=warnings, results={"matched": matched, "items": len(rows)})
