"""
Volatility stages: Bayesian fits of the model menu, and their comparison by marginal
likelihood.
"""

import math
from typing import Any, Dict, List

import logfire
import numpy as np

from econometrics.errors import CausalityToolkitError
from econometrics.garch import conditional_volatility, fit_garch_bayes
from econometrics.model_comparison import marginal_likelihood, ranking_table
from econometrics.sv import extract_volatility, fit_sv_bayes
from models.config import StageName, stage_seed
from models.schema import Series
from models.volatility import Family, MarginalLikelihoodEstimate, PosteriorDraws, VolatilityModelSpec
from stages.base import Stage, StageOutput
from utils.reports import Table, format_estimate


def fit_key(effect: str, model: str) -> str:
    return f"{effect}:{model}"


class VolatilityStage(Stage):
    """Fits every menu model to every effect series and extracts the source volatility."""

    name = StageName.VOLATILITY

    def _fit(self, spec: VolatilityModelSpec, y: Series) -> PosteriorDraws:
        v = self.config.volatility
        # Sampler streams hang off the sampler seed, which defaults to the master seed.
        seed = stage_seed(self.config.mcmc.seed, f"{self.name.value}:{y.name}:{spec.name}")
        mcmc = self.config.mcmc.model_copy(update={"seed": seed})
        if spec.family == Family.GARCH:
            return fit_garch_bayes(spec, y, self.config.priors, mcmc, variance_init=v.variance_init)
        return fit_sv_bayes(spec, y, self.config.priors, mcmc, in_mean_scale=v.in_mean_scale)

    def _volatility(self, fit: PosteriorDraws, y: Series) -> Series:
        if fit.spec.family == Family.SV:
            vol = extract_volatility(fit)
        else:
            vol = conditional_volatility(fit, y, variance_init=self.config.volatility.variance_init)
        return vol.rename(f"{y.name}_vol")

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        v = self.config.volatility
        supplied = state.get("volatility", {})
        fits: Dict[str, PosteriorDraws] = {}
        volatility: Dict[str, Series] = {}
        files: List[str] = []
        warnings: List[str] = []
        for effect in self.config.battery.effects:
            y = self.series(state, effect)
            for model in v.models:
                spec = VolatilityModelSpec.from_name(model)
                try:
                    fit = self._fit(spec, y)
                except CausalityToolkitError as e:
                    if model == v.source:
                        raise
                    message = f"{effect} {model}: {type(e).__name__}: {e}"
                    logfire.warn("Volatility fit failed", series=effect, model=model, error=str(e))
                    warnings.append(message)
                    continue
                fits[fit_key(effect, model)] = fit
                written = fit.to_files(self.output_dir / "draws" / effect)
                files += [p.relative_to(self.output_dir).as_posix() for p in written]
            if effect not in supplied:
                volatility[effect] = self._volatility(fits[fit_key(effect, v.source)], y)

        tables = [
            self._posterior_summary(fits),
            self._acceptance(fits),
            self._volatility_table(volatility, v.source),
        ]
        return StageOutput(
            tables=tables,
            files=files,
            warnings=warnings,
            updates={"fits": fits, "volatility": volatility},
        )

    @staticmethod
    def _posterior_summary(fits: Dict[str, PosteriorDraws]) -> Table:
        rows: List[list] = []
        for key, fit in fits.items():
            effect = key.split(":", 1)[0]
            for name in fit.names:
                draws = fit.column(name)
                lower, upper = (float(q) for q in np.quantile(draws, [0.05, 0.95]))
                rows.append(
                    [
                        effect,
                        fit.spec.name,
                        name,
                        float(draws.mean()),
                        float(draws.std(ddof=1)),
                        lower,
                        upper,
                        fit.rhat.get(name, math.nan),
                    ]
                )
        return Table(
            name="posterior_summary",
            title="Posterior summary",
            columns=["Series", "Model", "Parameter", "Mean", "Std. dev.", "5%", "95%", "R-hat"],
            rows=rows,
            note="R-hat is NA when a single chain is run.",
        )

    @staticmethod
    def _acceptance(fits: Dict[str, PosteriorDraws]) -> Table:
        rows = [
            [key.split(":", 1)[0], fit.spec.name, block, rate]
            for key, fit in fits.items()
            for block, rate in sorted(fit.acceptance_rates.items())
        ]
        return Table(
            name="sampler_acceptance",
            title="Sampler acceptance rates",
            columns=["Series", "Model", "Block", "Acceptance rate"],
            rows=rows,
        )

    @staticmethod
    def _volatility_table(volatility: Dict[str, Series], source: str) -> Table:
        if not volatility:
            return Table(name="volatility_series", title="Extracted volatility", columns=["Period"])
        names = list(volatility)
        index = volatility[names[0]].timestamps
        rows = [
            [str(period), *(float(volatility[n].values[i]) for n in names)]
            for i, period in enumerate(index)
        ]
        return Table(
            name="volatility_series",
            title="Extracted volatility",
            columns=["Period", *(volatility[n].name for n in names)],
            rows=rows,
            note=f"Posterior mean conditional standard deviation from {source}.",
        )


class ModelComparisonStage(Stage):
    """Log marginal likelihoods of every fitted model, and the ranking per series."""

    name = StageName.MODEL_COMPARISON

    def _estimate(self, fit: PosteriorDraws, y: Series) -> MarginalLikelihoodEstimate:
        v = self.config.volatility
        return marginal_likelihood(
            fit,
            y,
            v.n_is_draws,
            seed=self.stream_seed(y.name, fit.spec.name),
            prior_config=self.config.priors,
            n_inner_draws=v.n_inner_draws,
            full_cov=v.full_cov,
            in_mean_scale=v.in_mean_scale,
            variance_init=v.variance_init,
        )

    def execute(self, state: Dict[str, Any]) -> StageOutput:
        fits: Dict[str, PosteriorDraws] = state.get("fits", {})
        effects = self.config.battery.effects
        models = self.config.volatility.models
        estimates: Dict[str, Dict[str, MarginalLikelihoodEstimate]] = {e: {} for e in effects}
        warnings: List[str] = []
        for effect in effects:
            y = self.series(state, effect)
            for model in models:
                fit = fits.get(fit_key(effect, model))
                if fit is None:
                    continue
                try:
                    estimates[effect][model] = self._estimate(fit, y)
                except CausalityToolkitError as e:
                    logfire.warn("Marginal likelihood failed", series=effect, model=model, error=str(e))
                    warnings.append(f"{effect} {model}: {type(e).__name__}: {e}")

        grid = Table(
            name="marginal_likelihoods",
            title="Log marginal likelihoods",
            columns=["Model", *effects],
            rows=[
                [
                    model,
                    *(
                        format_estimate(estimates[e][model].log_ml, estimates[e][model].nse)
                        if model in estimates[e]
                        else None
                        for e in effects
                    ),
                ]
                for model in models
            ],
            note="Numerical standard errors in parentheses.",
        )

        rows: List[list] = []
        rankings = {}
        for effect in effects:
            found = estimates[effect]
            if len(found) < 2:
                continue
            ranking = ranking_table(found.values(), series=effect)
            rankings[effect] = ranking
            for r in ranking.rows:
                rows.append([effect, r.rank, r.model, r.log_ml, r.nse, r.log_bf_vs_best, found[r.model].ess])
            logfire.info("Model ranking", series=effect, best=ranking.best)
        ranking_table_out = Table(
            name="model_ranking",
            title="Model ranking by marginal likelihood",
            columns=["Series", "Rank", "Model", "Log ML", "NSE", "Log BF vs best", "ESS"],
            rows=rows,
        )
        return StageOutput(
            tables=[grid, ranking_table_out],
            warnings=warnings,
            results={"estimates": estimates, "rankings": rankings},
        )
