"""Monte Carlo empirical-best prediction.

For each area, L populations are drawn from the conditional distribution of
the nonsampled responses given the sample and the (estimated) parameters;
the functional is evaluated on each and averaged.  The per-draw functional
values are retained: they also feed the leading-term MSE estimator and the
naive prediction interval.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    AreaData,
    FittedNer,
    NerParams,
    SampleDataset,
    ValidationError,
    conditional_effects,
)
from .params import AreaParameter, evaluate_matrix
from .rng import derive

__all__ = [
    "EbpDraws",
    "EbpPrediction",
    "draw_conditional_population",
    "conditional_y_matrix",
    "predict",
    "predict_area",
]


@dataclass
class EbpDraws:
    """The L simulated functional values for one area."""

    area_id: int
    draws: np.ndarray  # (L,)
    params_used: object
    rng_seed: int | None = None

    def __post_init__(self):
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.size < 2:
            raise ValidationError("EBP requires at least L = 2 draws")
        if not np.all(np.isfinite(self.draws)):
            raise ValidationError(f"non-finite draws for area {self.area_id}")

    @property
    def L(self) -> int:
        return self.draws.size


@dataclass
class EbpPrediction:
    area_id: int
    theta_hat: float
    L: int
    mc_se: float


def conditional_y_matrix(
    params: NerParams,
    area: AreaData,
    u_mean: float,
    u_var: float,
    L: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """(L, N_i) matrix of conditional population draws for one area.

    Sampled positions carry the observed responses in every row; each row
    shares one draw of the area effect, b ~ N(u_mean, u_var), and nonsampled
    responses add independent N(0, sigma2_e / v) noise.
    """
    if area.pop_x is None:
        raise ValidationError(f"area {area.area_id}: population covariates required for prediction")
    N = area.pop_size
    mask = area.sampled_mask
    out = np.empty((L, N))
    if area.sampled:
        out[:, mask] = area.y
    ns = ~mask
    m = int(ns.sum())
    if m > 0:
        x_ns = area.pop_x[ns]
        v_ns = area.pop_v[ns] if area.pop_v is not None else np.ones(m)
        mu = x_ns @ params.beta
        b = u_mean + np.sqrt(u_var) * rng.standard_normal(L)
        e = rng.standard_normal((L, m)) * np.sqrt(params.sigma2_e / v_ns)
        out[:, ns] = mu[None, :] + b[:, None] + e
    return out


def draw_conditional_population(
    fit: FittedNer | NerParams,
    data: SampleDataset,
    area_id: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One full-length conditional population draw for an area."""
    params = fit.params if isinstance(fit, FittedNer) else fit
    area = data.area(area_id)
    if isinstance(fit, FittedNer):
        u_mean, u_var = fit.u_hat[area_id], fit.v2_hat[area_id]
    else:
        from .model import conditional_effect

        u_mean, u_var = conditional_effect(params, data, area_id)
    return conditional_y_matrix(params, area, u_mean, u_var, 1, rng)[0]


def predict_area(
    fit: FittedNer | NerParams,
    data: SampleDataset,
    area_id: int,
    param: AreaParameter,
    L: int = 500,
    rng_seed: int = 0,
    rng: np.random.Generator | None = None,
) -> tuple[EbpPrediction, EbpDraws]:
    """EBP of one area parameter from L conditional draws."""
    if L < 2:
        raise ValidationError("L must be at least 2")
    params = fit.params if isinstance(fit, FittedNer) else fit
    if isinstance(fit, FittedNer):
        u_hat, v2_hat = fit.u_hat, fit.v2_hat
    else:
        u_hat, v2_hat = conditional_effects(params, data)
    area = data.area(area_id)
    if rng is None:
        rng = derive(rng_seed, "predict", area_id)
    y = conditional_y_matrix(params, area, u_hat[area_id], v2_hat[area_id], L, rng)
    theta = evaluate_matrix(param, y)
    draws = EbpDraws(area_id=area_id, draws=theta, params_used=params, rng_seed=rng_seed)
    pred = EbpPrediction(
        area_id=area_id,
        theta_hat=float(theta.mean()),
        L=L,
        mc_se=float(theta.std(ddof=1) / np.sqrt(L)),
    )
    return pred, draws


def predict(
    fit: FittedNer | NerParams,
    data: SampleDataset,
    param: AreaParameter,
    L: int = 500,
    rng_seed: int = 0,
) -> tuple[list[EbpPrediction], list[EbpDraws]]:
    """EBP for every area that has population covariates."""
    preds, all_draws = [], []
    for area in data.areas:
        if area.pop_x is None:
            continue
        pred, draws = predict_area(fit, data, area.area_id, param, L=L, rng_seed=rng_seed)
        preds.append(pred)
        all_draws.append(draws)
    return preds, all_draws
