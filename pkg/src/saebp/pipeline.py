"""End-to-end prediction pipelines: fit, predict, MSE, intervals.

Two entry points with the same result shape: ``run_noninformative`` (model
bootstrap with refits) and ``run_informative`` (weight models, jackknife
covariance, transformed-normal parameter bootstrap, SIR draws).  Both share
the interval/report assembly, and both key the per-area draw noise by
(seed, "draws", area) so replicate predictors ride on common random numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ebp import EbpDraws, EbpPrediction
from .informative import (
    JackknifeCov,
    ModelParams,
    fit_area_weight_model,
    fit_weight_model,
    informative_bootstrap_multi,
    jackknife_cov,
)
from .intervals import IntervalReport, calibrated_ci, naive_ci, normal_ci
from .model import FittedNer, SampleDataset, ValidationError, fit_ml
from .mse import (
    BootstrapSet,
    MseReport,
    bootstrap_noninf_multi,
    mse_report,
    standard_mr_mse,
)
from .params import AreaParameter

__all__ = ["AreaResult", "PipelineResult", "run_noninformative", "run_informative"]

NORMAL_VARIANTS = ("noBC", "Add", "Mult", "Comp", "HM")


def _check_levels(L: int, levels: tuple[float, ...]) -> None:
    for level in levels:
        need = 2.0 / (1.0 - level)
        if L < need:
            raise ValidationError(
                f"L={L} cannot resolve the tails of the {level:g} interval; need L >= {need:.0f}"
            )


@dataclass
class AreaResult:
    area_id: int
    sampled: bool
    predictions: dict[str, EbpPrediction]
    reports: dict[str, MseReport]
    intervals: dict[str, dict[tuple[str, float], IntervalReport | None]]


@dataclass
class PipelineResult:
    fit: FittedNer
    areas: list[AreaResult]
    model_params: ModelParams | None = None
    jackknife: JackknifeCov | None = None
    diagnostics: dict = field(default_factory=dict)

    def area(self, area_id: int) -> AreaResult:
        for a in self.areas:
            if a.area_id == area_id:
                return a
        raise KeyError(area_id)


def _intervals_for(
    draws: EbpDraws,
    replicates,
    report: MseReport,
    theta_hat: float,
    levels: tuple[float, ...],
    normal_variants: tuple[str, ...],
) -> dict[tuple[str, float], IntervalReport | None]:
    out: dict[tuple[str, float], IntervalReport | None] = {}
    for level in levels:
        alpha = 1.0 - level
        out[("naive", level)] = naive_ci(draws, alpha)
        out[("cal", level)] = calibrated_ci(draws, replicates, alpha)
        for variant in normal_variants:
            mse_value = report.variant(variant)
            key = (f"norm:{variant}", level)
            if mse_value is None:
                continue
            try:
                out[key] = normal_ci(
                    theta_hat, mse_value, alpha, area_id=draws.area_id, variant=variant
                )
            except ValidationError:
                out[key] = None  # negative or infinite MSE estimate: no interval
    return out


def _assemble_results(
    data: SampleDataset,
    param_list: list[AreaParameter],
    base_draws: dict[str, dict[int, EbpDraws]],
    boots: dict[str, BootstrapSet],
    standard: dict[str, dict[int, float]] | None,
    levels: tuple[float, ...],
    normal_variants: tuple[str, ...],
) -> list[AreaResult]:
    results = []
    area_ids = list(next(iter(base_draws.values())).keys())
    for aid in area_ids:
        preds, reports, ivals = {}, {}, {}
        for p in param_list:
            draws = base_draws[p.name][aid]
            ab = boots[p.name].areas[aid]
            s_val = None if standard is None else standard[p.name].get(aid)
            report = mse_report(draws, ab, standard=s_val)
            theta_hat = float(draws.draws.mean())
            preds[p.name] = EbpPrediction(
                area_id=aid,
                theta_hat=theta_hat,
                L=draws.L,
                mc_se=float(draws.draws.std(ddof=1) / np.sqrt(draws.L)),
            )
            reports[p.name] = report
            variants = normal_variants + (("S",) if s_val is not None else ())
            ivals[p.name] = _intervals_for(draws, ab, report, theta_hat, levels, variants)
        results.append(
            AreaResult(
                area_id=aid,
                sampled=data.area(aid).sampled,
                predictions=preds,
                reports=reports,
                intervals=ivals,
            )
        )
    return results


def run_noninformative(
    data: SampleDataset,
    param_list: list[AreaParameter],
    L: int = 500,
    B: int = 200,
    rng_seed: int = 0,
    levels: tuple[float, ...] = (0.90, 0.95, 0.99),
    include_standard: bool = False,
    normal_variants: tuple[str, ...] = NORMAL_VARIANTS,
    fit: FittedNer | None = None,
) -> PipelineResult:
    """Fit the model and produce predictions, MSE reports and intervals."""
    if fit is None:
        fit = fit_ml(data)
    _check_levels(L, levels)
    base_draws, boots = bootstrap_noninf_multi(
        fit, data, param_list, L, B, rng_seed, keep_draws=True
    )
    standard = None
    if include_standard:
        standard = {
            p.name: standard_mr_mse(fit, data, p, L, B, rng_seed) for p in param_list
        }
    areas = _assemble_results(
        data, param_list, base_draws, boots, standard, levels, normal_variants
    )
    return PipelineResult(
        fit=fit,
        areas=areas,
        diagnostics={"bootstrap_dropped": next(iter(boots.values())).n_dropped},
    )


def run_informative(
    data: SampleDataset,
    param_list: list[AreaParameter],
    L: int = 500,
    B: int = 200,
    pool_size: int = 100,
    rng_seed: int = 0,
    levels: tuple[float, ...] = (0.90, 0.95, 0.99),
    interaction: bool = False,
    include_standard: bool = False,
    normal_variants: tuple[str, ...] = NORMAL_VARIANTS,
) -> PipelineResult:
    """Informative-design pipeline: weight models, jackknife, SIR prediction."""
    _check_levels(L, levels)
    fit = fit_ml(data)
    weight = fit_weight_model(data, interaction=interaction)
    need_area_model = any(not a.sampled and a.pop_x is not None for a in data.areas)
    have_aw = all(a.area_weight is not None for a in data.sampled_areas)
    area_weight = None
    if have_aw:
        area_weight = fit_area_weight_model(data, fit)
    elif need_area_model:
        raise ValidationError("nonsampled areas present but area weights are missing")
    params = ModelParams(ner=fit.params, weight=weight, area_weight=area_weight)
    cov = jackknife_cov(data, fit=fit, weight=weight, area_weight=area_weight, interaction=interaction)

    base_draws, boots, n_fallback = informative_bootstrap_multi(
        params, cov, data, param_list, L, B, pool_size, rng_seed, keep_draws=True
    )
    standard = None
    if include_standard:
        standard = {
            p.name: standard_mr_mse(fit, data, p, L, B, rng_seed) for p in param_list
        }
    areas = _assemble_results(
        data, param_list, base_draws, boots, standard, levels, normal_variants
    )
    return PipelineResult(
        fit=fit,
        areas=areas,
        model_params=params,
        jackknife=cov,
        diagnostics={"sir_fallbacks": n_fallback},
    )
