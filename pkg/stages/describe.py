"""
Descriptive statistics stage.
"""

from typing import Any, Dict

from econometrics.series_core import describe, spearman
from models.config import StageName
from stages.base import Stage, StageOutput
from utils.reports import Table

SUMMARY_COLUMNS = [
    ("Mean", "mean"),
    ("Median", "median"),
    ("Maximum", "max"),
    ("Minimum", "min"),
    ("Std. Dev.", "std_dev"),
    ("Skewness", "skewness"),
    ("Kurtosis", "kurtosis"),
    ("Jarque-Bera", "jarque_bera_stat"),
    ("p-value", "jarque_bera_p"),
]


class DescribeStage(Stage):
    """Summary statistics of every analysis series and their rank correlations."""

    name = StageName.DESCRIBE

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        series = state["series"]
        stats = {name: describe(s) for name, s in series.items()}

        summary = Table(
            name="summary_statistics",
            title="Summary statistics",
            columns=["Series", "Observations", *(label for label, _ in SUMMARY_COLUMNS)],
            rows=[
                [name, st.n, *(getattr(st, field) for _, field in SUMMARY_COLUMNS)]
                for name, st in stats.items()
            ],
            p_value_columns=[len(SUMMARY_COLUMNS) + 1],
            note="Kurtosis is the raw fourth moment (3 under normality).",
        )

        names = list(series)
        correlations = Table(
            name="rank_correlations",
            title="Spearman rank correlations",
            columns=["Series", *names],
            rows=[
                [a, *(1.0 if a == b else spearman(series[a], series[b]) for b in names)]
                for a in names
            ],
        )
        return StageOutput(tables=[summary, correlations], results=stats)
