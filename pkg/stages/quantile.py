"""
Quantile causality stages.

Returns and volatilities go through the same battery: the nonparametric causality in
quantiles test on each configured grid, with block-subsampling p-values. Decile tables put
lags in rows; vigintile tables are transposed with lags as columns.
"""

from typing import Any, Dict, List, Tuple

from econometrics.quantile_causality import augmented_qar, causality_table
from models.config import StageName
from models.schema import CausalityQuantileResult, GridKind, QuantileGrid, Series
from stages.base import Stage, StageOutput
from utils.reports import Table

GRIDS = {GridKind.DECILES: QuantileGrid.deciles, GridKind.VIGINTILES: QuantileGrid.vigintiles}
TRANSPOSED = {GridKind.VIGINTILES}


def _pair_label(result: CausalityQuantileResult) -> str:
    return f"{result.cause} -> {result.effect}"


def _interval(result: CausalityQuantileResult) -> str:
    a, b = result.joint_interval
    return f"[{a:g}, {b:g}]"


def quantile_table(name: str, title: str, results: List[CausalityQuantileResult], grid: QuantileGrid) -> Table:
    """p-values of one grid for several pairs, laid out by lag or, transposed, by quantile."""
    joint_label = _interval(results[0]) if results else "joint"
    if grid.kind in TRANSPOSED:
        lags = sorted({lag for r in results for lag in r.lags_tested})
        columns = ["Pair", "Quantile", *(f"Lag {lag}" for lag in lags)]
        rows: List[list] = []
        for r in results:
            per_tau, joint = r.per_tau, r.joint
            rows.append([_pair_label(r), joint_label, *(joint.get(lag) for lag in lags)])
            for tau in grid.levels:
                rows.append([_pair_label(r), f"{tau:g}", *(per_tau.get(lag, {}).get(tau) for lag in lags)])
    else:
        columns = ["Pair", "Lag", joint_label, *(f"{tau:g}" for tau in grid.levels)]
        rows = []
        for r in results:
            per_tau, joint = r.per_tau, r.joint
            for lag in r.lags_tested:
                rows.append([_pair_label(r), lag, joint[lag], *(per_tau[lag].get(tau) for tau in grid.levels)])
    return Table(
        name=name,
        title=title,
        columns=columns,
        rows=rows,
        p_value_columns=list(range(2, len(columns))),
        note="Subsampling p-values; the interval column tests all quantiles in it jointly.",
    )


def subsample_diagnostics(name: str, results: List[CausalityQuantileResult]) -> Table:
    rows = [
        [
            _pair_label(r),
            r.grid_kind.value,
            c.lag,
            _interval(r) if c.tau is None else c.label,
            c.statistic,
            c.p_value,
            c.mean_subsample_statistic,
            r.block_size,
            r.n_blocks,
        ]
        for r in results
        for c in r.cells
    ]
    return Table(
        name=name,
        title="Subsampling diagnostics",
        columns=[
            "Pair",
            "Grid",
            "Lag",
            "Quantile",
            "Statistic",
            "p-value",
            "Mean subsample statistic",
            "Block size",
            "Blocks",
        ],
        rows=rows,
        p_value_columns=[5],
    )


class QuantileBattery(Stage):
    """Runs causality in quantiles from every cause to a set of effect series."""

    prefix: str = "quantile_causality"
    title: str = "Causality in quantiles"

    def effect_series(self, state: Dict[str, Any]) -> Dict[str, Series]:
        raise NotImplementedError

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        q = self.config.quantile
        effects = self.effect_series(state)
        causes = state["series"]
        results: Dict[GridKind, List[CausalityQuantileResult]] = {}
        tables: List[Table] = []
        for kind in q.grids:
            grid = GRIDS[kind]()
            results[kind] = []
            for effect, cause in self.config.battery.pairs:
                cfg = self.config.subsampling.model_copy(
                    update={"seed": self.stream_seed(effect, cause, kind.value)}
                )
                results[kind].append(causality_table(effects[effect], causes[cause], q.orders, grid, cfg))
            tables.append(
                quantile_table(f"{self.prefix}_{kind.value}", f"{self.title} ({kind.value})", results[kind], grid)
            )
        everything = [r for kind in q.grids for r in results[kind]]
        tables.append(subsample_diagnostics(f"{self.prefix}_subsampling", everything))
        return StageOutput(tables=tables, results=results)


class QuantileStage(QuantileBattery):
    name = StageName.QUANTILE

    def effect_series(self, state: Dict[str, Any]) -> Dict[str, Series]:
        return state["series"]


class VolatilityCausalityStage(QuantileBattery):
    """Causality in quantiles on the extracted (or supplied) volatility of each effect."""

    name = StageName.VOLATILITY_CAUSALITY
    prefix = "volatility_quantile_causality"
    title = "Causality in quantiles, volatility"

    def effect_series(self, state: Dict[str, Any]) -> Dict[str, Series]:
        return state["volatility"]


def _sign(lower: float, upper: float, collinear: bool) -> str:
    if collinear:
        return "collinear"
    if lower > 0.0:
        return "+"
    if upper < 0.0:
        return "-"
    return "0"


class AugmentedQarStage(Stage):
    """Sign of the lagged cause in a QAR(3) of the effect, with bootstrap bands."""

    name = StageName.AUGMENTED_QAR

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        series = state["series"]
        q = self.config.quantile
        grid = GRIDS[q.grids[0]]()
        results: Dict[Tuple[str, str], dict] = {}
        rows: List[list] = []
        for effect, cause in self.config.battery.pairs:
            coefs = augmented_qar(
                series[effect],
                series[cause],
                grid,
                n_boot=q.augmented_n_boot,
                seed=self.stream_seed(effect, cause),
            )
            results[(effect, cause)] = coefs
            for tau in grid.levels:
                c = coefs[tau]
                sign = _sign(c.lower, c.upper, c.collinear)
                rows.append([f"{cause} -> {effect}", f"{tau:g}", c.beta, c.std_error, c.lower, c.upper, sign])
        table = Table(
            name="augmented_qar",
            title="Lagged cause in an augmented QAR(3)",
            columns=["Pair", "Quantile", "Beta", "Std. error", "Lower", "Upper", "Sign"],
            rows=rows,
            note="Bands are beta +/- 1.96 block-bootstrap standard errors.",
        )
        return StageOutput(tables=[table], results=results)
