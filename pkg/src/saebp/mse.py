"""MSE estimation for the Monte Carlo empirical-best predictor.

The estimator of the leading term is the sample variance of the L prediction
draws.  The parameter-variance term comes from a parametric bootstrap that
regenerates responses for sampled units only, refits, and re-predicts with
bootstrap parameters but the original data.  Four bias corrections of the
leading-term estimator (additive, multiplicative, compromise, HM) reuse the
per-replicate leading-term estimates, so the whole procedure costs B*L
simulated samples.  The classic single-bootstrap estimator that regenerates
the full population is provided as a baseline.

Replicate prediction draws use common random numbers: the noise stream for a
given area is keyed by (seed, draw_key, area) and reused for every replicate,
so replicate predictors differ from the base predictor only through the
parameters.  With zero parameter dispersion the second term vanishes exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .ebp import EbpDraws, conditional_y_matrix
from .model import (
    EstimationError,
    FittedNer,
    NerParams,
    NerStats,
    SampleDataset,
    ValidationError,
    _fit_from_stats,
    conditional_effects,
)
from .params import AreaParameter, evaluate_many, evaluate_matrix
from .rng import derive

__all__ = [
    "BootstrapReplicate",
    "AreaBootstrap",
    "BootstrapSet",
    "BiasCorrectedM1",
    "MseReport",
    "m1_hat",
    "bootstrap_noninf",
    "bootstrap_noninf_multi",
    "m2_hat",
    "m1_bar_star",
    "bias_corrected_m1",
    "mse_report",
    "standard_mr_mse",
    "simulate_sample_responses",
]

MAX_DROP_FRACTION = 0.10


@dataclass
class BootstrapReplicate:
    """One bootstrap replicate's results for one area."""

    b: int
    psi_hat_b: object
    theta_hat_b: float
    m1_b: float
    draws: np.ndarray | None = None

    def __post_init__(self):
        if self.m1_b < 0:
            raise ValidationError("per-replicate leading-term estimate must be nonnegative")


@dataclass
class AreaBootstrap:
    """Stacked replicate results for one area."""

    area_id: int
    theta_b: np.ndarray  # (B_eff,)
    m1_b: np.ndarray  # (B_eff,)
    draws_b: np.ndarray | None = None  # (B_eff, L)


class BootstrapSet:
    """Results of a bootstrap run across areas, replicates stacked per area."""

    def __init__(
        self,
        params_b: list,
        areas: dict[int, AreaBootstrap],
        b_requested: int,
        n_dropped: int,
    ):
        self.params_b = params_b
        self.areas = areas
        self.b_requested = b_requested
        self.n_dropped = n_dropped

    @property
    def b_eff(self) -> int:
        return len(self.params_b)

    def replicates_for(self, area_id: int) -> list[BootstrapReplicate]:
        ab = self.areas[area_id]
        out = []
        for k in range(self.b_eff):
            out.append(
                BootstrapReplicate(
                    b=k,
                    psi_hat_b=self.params_b[k],
                    theta_hat_b=float(ab.theta_b[k]),
                    m1_b=float(ab.m1_b[k]),
                    draws=None if ab.draws_b is None else ab.draws_b[k],
                )
            )
        return out


def m1_hat(draws: EbpDraws | np.ndarray) -> float:
    """Leading-term estimator: sample variance of the prediction draws."""
    values = draws.draws if isinstance(draws, EbpDraws) else np.asarray(draws, dtype=float)
    if values.size < 2:
        raise ValidationError("leading-term estimator requires at least 2 draws")
    return float(values.var(ddof=1))


def _theta_b_array(replicates) -> np.ndarray:
    if isinstance(replicates, AreaBootstrap):
        return replicates.theta_b
    return np.array([r.theta_hat_b for r in replicates], dtype=float)


def _m1_b_array(replicates) -> np.ndarray:
    if isinstance(replicates, AreaBootstrap):
        return replicates.m1_b
    return np.array([r.m1_b for r in replicates], dtype=float)


def m2_hat(replicates, theta_hat: float) -> float:
    """Bootstrap estimator of the parameter-variance term:
    mean of (theta_hat_b - theta_hat)^2 over replicates."""
    tb = _theta_b_array(replicates)
    if tb.size < 2:
        raise ValidationError("need at least 2 surviving bootstrap replicates")
    return float(np.mean((tb - theta_hat) ** 2))


def m1_bar_star(replicates) -> float:
    """Bootstrap mean of the per-replicate leading-term estimates."""
    return float(np.mean(_m1_b_array(replicates)))


@dataclass
class BiasCorrectedM1:
    add: float
    mult: float
    comp: float
    hm: float
    mult_infinite: bool = False


def bias_corrected_m1(m1: float, m1_bar: float) -> BiasCorrectedM1:
    """Four bias-corrected versions of the leading-term estimate.

    add  = 2 m1 - m1_bar                      (may be negative)
    mult = m1^2 / m1_bar                      (+inf if m1_bar = 0 < m1)
    comp = add if m1 >= m1_bar else mult
    hm   = add if m1 >= m1_bar else m1 * exp(-(m1_bar - m1)/m1_bar)
    """
    if m1 < 0 or m1_bar < 0:
        raise ValidationError("leading-term estimates must be nonnegative")
    add = 2.0 * m1 - m1_bar
    if m1_bar == 0.0:
        mult = 0.0 if m1 == 0.0 else math.inf
    else:
        mult = m1 * m1 / m1_bar
    if m1 >= m1_bar:
        comp = add
        hm = add
    else:
        comp = mult
        hm = m1 * math.exp(-(m1_bar - m1) / m1_bar)
    return BiasCorrectedM1(
        add=add, mult=mult, comp=comp, hm=hm, mult_infinite=not math.isfinite(mult)
    )


@dataclass
class MseReport:
    """Per-area MSE components, the five proposed variants and the baseline."""

    area_id: int
    m1: float
    m2: float
    m1_bar_star: float
    bias_add: float
    mse_noBC: float
    mse_add: float
    mse_mult: float
    mse_comp: float
    mse_hm: float
    mse_standard: float | None = None
    negative_add: bool = False
    infinite_mult: bool = False

    def variant(self, name: str) -> float | None:
        key = {
            "noBC": self.mse_noBC,
            "Add": self.mse_add,
            "Mult": self.mse_mult,
            "Comp": self.mse_comp,
            "HM": self.mse_hm,
            "S": self.mse_standard,
        }
        if name not in key:
            raise ValueError(f"unknown MSE variant {name!r}")
        return key[name]


MSE_VARIANTS = ("noBC", "Add", "Mult", "Comp", "HM")


def mse_report(
    draws: EbpDraws,
    replicates,
    standard: float | None = None,
) -> MseReport:
    """Assemble the five MSE variants for one area."""
    m1 = m1_hat(draws)
    theta_hat = float(np.mean(draws.draws if isinstance(draws, EbpDraws) else draws))
    m2 = m2_hat(replicates, theta_hat)
    m1_bar = m1_bar_star(replicates)
    bc = bias_corrected_m1(m1, m1_bar)
    return MseReport(
        area_id=draws.area_id if isinstance(draws, EbpDraws) else -1,
        m1=m1,
        m2=m2,
        m1_bar_star=m1_bar,
        bias_add=m1_bar - m1,
        mse_noBC=m1 + m2,
        mse_add=bc.add + m2,
        mse_mult=bc.mult + m2,
        mse_comp=bc.comp + m2,
        mse_hm=bc.hm + m2,
        mse_standard=standard,
        negative_add=bc.add + m2 < 0.0,
        infinite_mult=bc.mult_infinite,
    )


def simulate_sample_responses(
    params: NerParams, data: SampleDataset, rng: np.random.Generator
) -> dict[int, np.ndarray]:
    """Model draws of the responses for sampled units only (one fresh area
    effect per area, untruncated)."""
    out = {}
    for a in data.sampled_areas:
        b = rng.normal(0.0, np.sqrt(params.sigma2_u))
        e = rng.standard_normal(a.n) * np.sqrt(params.sigma2_e / a.v)
        out[a.area_id] = a.x @ params.beta + b + e
    return out


def _refit_params(
    fit: FittedNer, data: SampleDataset, B: int, rng_seed: int
) -> tuple[list[NerParams], int]:
    """B bootstrap refits from model draws of the sampled responses."""
    stats = NerStats(data)
    ordered_sampled = [data.area(aid) for aid in stats.area_ids]
    params_b: list[NerParams] = []
    n_dropped = 0
    for b in range(B):
        ystar = simulate_sample_responses(fit.params, data, derive(rng_seed, "boot_sim", b))
        stats.set_y([ystar[a.area_id] for a in ordered_sampled])
        try:
            refit = _fit_from_stats(stats, None, start=fit.params)
        except EstimationError:
            n_dropped += 1
            continue
        params_b.append(refit.params)
    if n_dropped > MAX_DROP_FRACTION * B:
        raise EstimationError(
            f"{n_dropped} of {B} bootstrap replicates failed to refit (> {MAX_DROP_FRACTION:.0%})"
        )
    if n_dropped:
        warnings.warn(f"dropped {n_dropped} of {B} bootstrap replicates after refit failure")
    return params_b, n_dropped


def noninf_draw_batch(
    params_list: list[NerParams],
    effects: list[tuple[float, float]],
    area,
    L: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(K, L, N_i) conditional draws for one area under K parameter vectors
    sharing one noise stream (common random numbers)."""
    N = area.pop_size
    mask = area.sampled_mask
    K = len(params_list)
    out = np.empty((K, L, N))
    out[:, :, mask] = area.y
    ns = ~mask
    m = int(ns.sum())
    bnoise = rng.standard_normal(L)
    if m == 0:
        return out
    z = rng.standard_normal((L, m))
    x_ns = area.pop_x[ns]
    v_ns = area.pop_v[ns] if area.pop_v is not None else np.ones(m)
    inv_sqrt_v = 1.0 / np.sqrt(v_ns)
    for k, params in enumerate(params_list):
        u_mean, u_var = effects[k]
        b = u_mean + np.sqrt(max(u_var, 0.0)) * bnoise
        mu = x_ns @ params.beta
        out[k][:, ns] = mu[None, :] + b[:, None] + np.sqrt(params.sigma2_e) * inv_sqrt_v * z
    return out


def bootstrap_noninf_multi(
    fit: FittedNer,
    data: SampleDataset,
    param_list: list[AreaParameter],
    L: int,
    B: int,
    rng_seed: int,
    keep_draws: bool = True,
) -> tuple[dict[str, dict[int, "EbpDraws"]], dict[str, BootstrapSet]]:
    """Parametric bootstrap shared across several functionals.

    Returns (base draws, one BootstrapSet per functional).  All functionals
    share the same B refits and the same conditional draw matrices; the base
    prediction is entry 0 of the common-random-number noise batch, so
    replicate predictors collapse onto the base predictor as the parameter
    dispersion goes to zero.
    """
    if B < 2:
        raise ValidationError("B must be at least 2")
    pred_areas = [a for a in data.areas if a.pop_x is not None]
    if not pred_areas:
        raise ValidationError("no areas with population covariates to predict")
    params_b, n_dropped = _refit_params(fit, data, B, rng_seed)
    mps = [fit.params] + params_b
    eff = [conditional_effects(p, data) for p in mps]

    base_draws: dict[str, dict[int, EbpDraws]] = {p.name: {} for p in param_list}
    acc = {
        p.name: {a.area_id: ([], [], [] if keep_draws else None) for a in pred_areas}
        for p in param_list
    }
    for area in pred_areas:
        rng = derive(rng_seed, "draws", area.area_id)
        effects = [(u[area.area_id], v[area.area_id]) for (u, v) in eff]
        y_all = noninf_draw_batch(mps, effects, area, L, rng)
        for k in range(len(mps)):
            vals = evaluate_many(param_list, y_all[k])
            for p in param_list:
                theta = vals[p.name]
                if k == 0:
                    base_draws[p.name][area.area_id] = EbpDraws(
                        area_id=area.area_id,
                        draws=theta,
                        params_used=fit.params,
                        rng_seed=rng_seed,
                    )
                else:
                    th_list, m1_list, dr_list = acc[p.name][area.area_id]
                    th_list.append(theta.mean())
                    m1_list.append(theta.var(ddof=1))
                    if dr_list is not None:
                        dr_list.append(theta)
    out = {}
    for p in param_list:
        areas = {}
        for area in pred_areas:
            th_list, m1_list, dr_list = acc[p.name][area.area_id]
            areas[area.area_id] = AreaBootstrap(
                area_id=area.area_id,
                theta_b=np.array(th_list),
                m1_b=np.array(m1_list),
                draws_b=None if dr_list is None else np.vstack(dr_list),
            )
        out[p.name] = BootstrapSet(
            params_b=params_b, areas=areas, b_requested=B, n_dropped=n_dropped
        )
    return base_draws, out


def bootstrap_noninf(
    fit: FittedNer,
    data: SampleDataset,
    param: AreaParameter,
    L: int,
    B: int,
    rng_seed: int,
    keep_draws: bool = True,
) -> BootstrapSet:
    """Parametric bootstrap for one functional (see bootstrap_noninf_multi)."""
    _, boots = bootstrap_noninf_multi(fit, data, [param], L, B, rng_seed, keep_draws=keep_draws)
    return boots[param.name]


def standard_mr_mse(
    fit: FittedNer,
    data: SampleDataset,
    param: AreaParameter,
    L: int,
    B: int,
    rng_seed: int,
) -> dict[int, float]:
    """Single-bootstrap MSE baseline that regenerates the entire population.

    Per replicate: simulate a full bootstrap population from the fitted model,
    take its true functional value, refit on the bootstrap sample, re-predict,
    and average the squared prediction errors over replicates.
    """
    pred_areas = [a for a in data.areas if a.pop_x is not None]
    if not pred_areas:
        raise ValidationError("no areas with population covariates")
    stats = NerStats(data)
    ordered_sampled = [data.area(aid) for aid in stats.area_ids]
    sq_err = {a.area_id: [] for a in pred_areas}
    n_dropped = 0
    for b in range(B):
        rng = derive(rng_seed, "mr_pop", b)
        ypop: dict[int, np.ndarray] = {}
        ystar: dict[int, np.ndarray] = {}
        for a in data.areas:
            if a.pop_x is None:
                if a.sampled:
                    ystar[a.area_id] = (
                        a.x @ fit.params.beta
                        + rng.normal(0.0, np.sqrt(fit.params.sigma2_u))
                        + rng.standard_normal(a.n) * np.sqrt(fit.params.sigma2_e / a.v)
                    )
                continue
            v = a.pop_v if a.pop_v is not None else np.ones(a.pop_size)
            bi = rng.normal(0.0, np.sqrt(fit.params.sigma2_u))
            e = rng.standard_normal(a.pop_size) * np.sqrt(fit.params.sigma2_e / v)
            y = a.pop_x @ fit.params.beta + bi + e
            ypop[a.area_id] = y
            if a.sampled:
                ystar[a.area_id] = y[a.sampled_mask]
        boot_data = data.with_sample_y(ystar)
        stats.set_y([ystar[a.area_id] for a in ordered_sampled])
        try:
            refit = _fit_from_stats(stats, None, start=fit.params)
        except EstimationError:
            n_dropped += 1
            continue
        u_hat, v2_hat = conditional_effects(refit.params, boot_data)
        for a in pred_areas:
            truth = float(evaluate_matrix(param, ypop[a.area_id][None, :])[0])
            y = conditional_y_matrix(
                refit.params,
                boot_data.area(a.area_id),
                u_hat[a.area_id],
                v2_hat[a.area_id],
                L,
                derive(rng_seed, "mr_draws", b, a.area_id),
            )
            theta_hat = float(evaluate_matrix(param, y).mean())
            sq_err[a.area_id].append((theta_hat - truth) ** 2)
    if n_dropped > MAX_DROP_FRACTION * B:
        raise EstimationError(
            f"{n_dropped} of {B} bootstrap replicates failed to refit (> {MAX_DROP_FRACTION:.0%})"
        )
    if n_dropped:
        warnings.warn(f"dropped {n_dropped} of {B} bootstrap replicates after refit failure")
    return {aid: float(np.mean(v)) for aid, v in sq_err.items()}
