"""
Ingest stage: read the CSV, deflate and difference prices, log the level series, align.
"""

from typing import Any, Dict, List

from econometrics.errors import MissingColumn
from econometrics.series_core import align, deflate, load_csv, log_level, log_returns
from models.config import StageName
from models.schema import Series
from stages.base import Stage, StageOutput
from utils.reports import Table


class IngestStage(Stage):
    """Turns the raw input file into aligned analysis series."""

    name = StageName.INGEST

    def _load(self) -> Dict[str, Series]:
        cfg = self.config.input
        columns = dict(cfg.columns)
        for effect, column in cfg.volatility_columns.items():
            columns[f"{effect}_vol"] = column
        try:
            return load_csv(cfg.path, columns, cfg.date_column)
        except MissingColumn as e:
            raise MissingColumn(e.column, stage=self.name.value) from e

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        raw = self._load()
        t = self.config.transforms

        transformed: Dict[str, Series] = {}
        kinds: Dict[str, str] = {}
        for name in t.prices:
            price = raw[name]
            if t.deflator is not None:
                price = deflate(price, raw[t.deflator])
            transformed[name] = log_returns(price).rename(name)
            kinds[name] = "real % log return" if t.deflator else "% log return"
        for name in t.log_levels:
            transformed[name] = log_level(raw[name]).rename(name)
            kinds[name] = "log level"
        for name in t.levels:
            transformed[name] = raw[name]
            kinds[name] = "level"

        supplied = {e: raw[f"{e}_vol"] for e in self.config.input.volatility_columns}
        names: List[str] = [*transformed, *(f"{e}_vol" for e in supplied)]
        aligned = dict(zip(names, align([*transformed.values(), *supplied.values()])))
        series = {name: aligned[name] for name in transformed}
        volatility = {e: aligned[f"{e}_vol"] for e in supplied}

        rows = [
            [name, kinds[name], str(s.timestamps[0]), str(s.timestamps[-1]), len(s)]
            for name, s in series.items()
        ]
        rows += [
            [s.name, "supplied volatility", str(s.timestamps[0]), str(s.timestamps[-1]), len(s)]
            for s in volatility.values()
        ]
        table = Table(
            name="sample",
            title="Analysis sample",
            columns=["Series", "Transform", "First", "Last", "Observations"],
            rows=rows,
        )
        return StageOutput(tables=[table], updates={"series": series, "volatility": volatility})
