"""Prediction and MSE estimation under informative sampling.

The sample distribution of the response keeps the nested error form; the
survey weights carry the information about selection.  We model the
conditional mean of the unit weight given (y, x) as

    E[w_ij | y, x, selected] = kappa_i * exp(x' gamma1 + gamma2 y + (x' gamma3) y),

fitted by least squares on the log scale with area fixed effects absorbing
log kappa_i, and a lognormal model for the area weight,

    log(w_i) | u_i ~ N(lambda0 + lambda1 u_i, tau^2),

fitted by maximizing its closed-form marginal likelihood with the
conditional moments of u_i held at the base fit.

Draws from the population distribution of nonsampled responses use sampling
importance resampling: candidates come from the fitted sample distribution
and are resampled with weights (omega - 1) for nonsampled units of sampled
areas, omega for units of nonsampled areas, and (E[w_i|u] - 1) for the area
effect of nonsampled areas.  Parameter uncertainty for the second MSE term
comes from a leave-one-area-out jackknife covariance combined with a normal
parameter bootstrap on a log-transformed scale, so simulated variance
components stay positive.

All draw noise for an area is generated once and shared by the base
parameters and every bootstrap replicate (common random numbers): replicate
predictors differ from the base predictor only through the parameters, and
collapse onto it exactly as the parameter covariance goes to zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .ebp import EbpDraws
from .model import (
    AreaData,
    EstimationError,
    FittedNer,
    NerParams,
    NerStats,
    SampleDataset,
    ValidationError,
    _fit_from_stats,
    conditional_effects,
    fit_ml,
)
from .mse import AreaBootstrap, BootstrapSet, MseReport, mse_report
from .params import AreaParameter, evaluate_many
from .rng import derive

__all__ = [
    "WeightModelParams",
    "AreaWeightParams",
    "ModelParams",
    "JackknifeCov",
    "fit_weight_model",
    "fit_area_weight_model",
    "sir_draw_sampled_area",
    "sir_draw_nonsampled_area",
    "sir_y_matrix",
    "jackknife_cov",
    "param_bootstrap_draws",
    "mse_informative",
    "informative_bootstrap_multi",
]

SIR_CHUNK = 2_000_000  # max candidate values materialized per unit chunk


@dataclass
class WeightModelParams:
    """Log-linear unit-weight model coefficients.

    gamma1 covers the non-intercept covariates, gamma3 the (covariate x y)
    interactions (zero-length when the model is fitted without them), and
    log_kappa holds the per-area fixed effects of sampled areas.
    """

    gamma1: np.ndarray
    gamma2: float
    gamma3: np.ndarray
    log_kappa: dict[int, float]

    def __post_init__(self):
        self.gamma1 = np.atleast_1d(np.asarray(self.gamma1, dtype=float))
        self.gamma3 = (
            np.atleast_1d(np.asarray(self.gamma3, dtype=float))
            if np.size(self.gamma3)
            else np.zeros(0)
        )


@dataclass
class AreaWeightParams:
    """Lognormal area-weight model log(w_i) ~ N(lambda0 + lambda1 u_i, tau^2)."""

    lambda0: float
    lambda1: float
    tau2: float

    def __post_init__(self):
        if self.tau2 <= 0:
            raise ValidationError(f"tau2 must be positive, got {self.tau2}")


@dataclass
class ModelParams:
    """Full parameter vector: response model, unit-weight and area-weight models."""

    ner: NerParams
    weight: WeightModelParams | None = None
    area_weight: AreaWeightParams | None = None


def _weight_design(area: AreaData, interaction: bool) -> np.ndarray:
    """Regressors of the log-weight model for one area: [x_tilde, y, x_tilde*y]."""
    xt = area.x[:, 1:]
    cols = [xt, area.y[:, None]]
    if interaction:
        cols.append(xt * area.y[:, None])
    return np.hstack(cols)


def fit_weight_model(data: SampleDataset, interaction: bool = False) -> WeightModelParams:
    """Least-squares fit of the log-weight model with area fixed effects."""
    areas = list(data.sampled_areas)
    for a in areas:
        if a.unit_weights is None:
            raise ValidationError(f"area {a.area_id}: unit weights required for the weight model")
    r = data.p - 1 if interaction else 0
    ncol = (data.p - 1) + 1 + r
    # area fixed effects absorbed by within-area demeaning
    zs, ws = [], []
    for a in areas:
        z = _weight_design(a, interaction)
        logw = np.log(a.unit_weights)
        zs.append(z - z.mean(axis=0))
        ws.append(logw - logw.mean())
    zd = np.vstack(zs)
    wd = np.concatenate(ws)
    if np.linalg.matrix_rank(zd) < ncol:
        raise EstimationError("collinear regressors in the weight model")
    coef, *_ = np.linalg.lstsq(zd, wd, rcond=None)
    gamma1 = coef[: data.p - 1]
    gamma2 = float(coef[data.p - 1])
    gamma3 = coef[data.p :] if interaction else np.zeros(0)
    log_kappa = {}
    for a in areas:
        z = _weight_design(a, interaction)
        log_kappa[a.area_id] = float(np.mean(np.log(a.unit_weights) - z @ coef))
    return WeightModelParams(gamma1=gamma1, gamma2=gamma2, gamma3=gamma3, log_kappa=log_kappa)


def _area_weight_loglik(
    lam0: float, lam1: float, tau2: float, logw: np.ndarray, u: np.ndarray, v2: np.ndarray
) -> float:
    var = lam1 * lam1 * v2 + tau2
    resid = logw - lam0 - lam1 * u
    return float(-0.5 * np.sum(np.log(2.0 * np.pi * var) + resid * resid / var))


def _fit_area_weight(
    logw: np.ndarray, u: np.ndarray, v2: np.ndarray, start: AreaWeightParams | None = None
) -> AreaWeightParams:
    if logw.size < 3:
        raise ValidationError("area-weight model requires at least 3 sampled areas")
    if start is None:
        z = np.column_stack([np.ones_like(u), u])
        coef, *_ = np.linalg.lstsq(z, logw, rcond=None)
        resid = logw - z @ coef
        t0 = np.array([coef[0], coef[1], np.log(max(float(np.mean(resid**2)), 1e-8))])
    else:
        t0 = np.array([start.lambda0, start.lambda1, np.log(start.tau2)])

    def neg_ll(t):
        tau2 = np.exp(np.clip(t[2], -40.0, 40.0))
        return -_area_weight_loglik(t[0], t[1], tau2, logw, u, v2)

    res = minimize(
        neg_ll, t0, method="Nelder-Mead", options=dict(maxiter=500, xatol=1e-10, fatol=1e-10)
    )
    tau2 = float(np.exp(np.clip(res.x[2], -40.0, 40.0)))
    return AreaWeightParams(lambda0=float(res.x[0]), lambda1=float(res.x[1]), tau2=max(tau2, 1e-12))


def fit_area_weight_model(data: SampleDataset, fit: FittedNer) -> AreaWeightParams:
    """ML fit of the lognormal area-weight model, conditional moments of u_i
    held fixed at the base response-model fit."""
    ids = [a.area_id for a in data.sampled_areas if a.area_weight is not None]
    if len(ids) < 3:
        raise ValidationError("area-weight model requires at least 3 sampled areas with weights")
    logw = np.array([np.log(data.area(i).area_weight) for i in ids])
    u = np.array([fit.u_hat[i] for i in ids])
    v2 = np.array([fit.v2_hat[i] for i in ids])
    return _fit_area_weight(logw, u, v2)


# --- sampling importance resampling ------------------------------------------


def _unit_tilt_coeffs(
    weight: WeightModelParams, x_units: np.ndarray, log_kappa: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-unit intercept and y-slope of log omega(y, x)."""
    xt = x_units[:, 1:]
    a = log_kappa + xt @ weight.gamma1
    c = np.full(x_units.shape[0], weight.gamma2)
    if weight.gamma3.size:
        c = c + xt @ weight.gamma3
    return a, c


def _complement_weights(g: np.ndarray) -> np.ndarray:
    """max(omega - 1, 0) from log omega; the fitted weight mean can dip below
    one, which cannot happen under a probability design, so it is floored."""
    w = np.expm1(np.clip(g, -745.0, 400.0))
    return np.maximum(w, 0.0, out=w)


def _race_select(weights: np.ndarray, inv_e: np.ndarray) -> tuple[np.ndarray, int]:
    """Categorical draw per row via the exponential race argmax(w / E).

    Rows whose weights are all zero fall back to an unweighted draw
    (argmax of 1/E alone is uniform); their count is returned.
    """
    score = weights * inv_e
    idx = np.argmax(score, axis=-1)
    best = np.take_along_axis(score, idx[..., None], axis=-1)[..., 0]
    dead = ~(best > 0)
    n_dead = int(dead.sum())
    if n_dead:
        idx = np.where(dead, np.argmax(inv_e, axis=-1), idx)
    return idx, n_dead


class _AreaCoeffs:
    """Per-parameter-vector quantities entering the SIR draws of one area."""

    def __init__(
        self,
        mp: ModelParams,
        x_units: np.ndarray,
        v_units: np.ndarray,
        log_kappa: float,
    ):
        self.mu = x_units @ mp.ner.beta
        self.sd = np.sqrt(mp.ner.sigma2_e / v_units)
        self.tilt_a, self.tilt_c = _unit_tilt_coeffs(mp.weight, x_units, log_kappa)


def sir_area_batch(
    mps: list[ModelParams],
    effects: list[tuple[float, float]],
    area: AreaData,
    L: int,
    pool_size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """(K, L, N_i) conditional population draws for one area under K parameter
    vectors sharing one noise stream; second element is the SIR fallback count.

    ``effects[k]`` is the conditional (mean, variance) of the area effect
    under ``mps[k]``.  RNG consumption does not depend on the parameter
    values, so every k sees identical underlying noise.
    """
    if area.pop_x is None:
        raise ValidationError(f"area {area.area_id}: population covariates required")
    K = len(mps)
    N = area.pop_size
    out = np.empty((K, L, N))
    n_fallback = 0
    tiny = np.finfo(float).tiny

    if area.sampled:
        mask = area.sampled_mask
        out[:, :, mask] = area.y
        ns = ~mask
        m = int(ns.sum())
        bnoise = rng.standard_normal(L)
        if m == 0:
            return out, 0
        x_ns = area.pop_x[ns]
        v_ns = area.pop_v[ns] if area.pop_v is not None else np.ones(m)
        ns_idx = np.flatnonzero(ns)
        coeffs = []
        for mp in mps:
            if mp.weight is None:
                raise ValidationError("weight model parameters required for informative draws")
            lk = mp.weight.log_kappa.get(area.area_id, 0.0)
            coeffs.append(_AreaCoeffs(mp, x_ns, v_ns, lk))
        b_draws = [u + math.sqrt(max(v, 0.0)) * bnoise for (u, v) in effects]

        chunk = max(1, SIR_CHUNK // max(L * pool_size, 1))
        for j0 in range(0, m, chunk):
            j1 = min(j0 + chunk, m)
            mc = j1 - j0
            z = rng.standard_normal((L, mc, pool_size))
            inv_e = 1.0 / np.maximum(rng.exponential(size=(L, mc, pool_size)), tiny)
            cols = ns_idx[j0:j1]
            for k in range(K):
                ck = coeffs[k]
                # log omega(cand) = tilt_a + tilt_c * cand is affine in the noise
                off = (ck.tilt_a + ck.tilt_c * ck.mu)[j0:j1][None, :] + np.outer(
                    b_draws[k], ck.tilt_c[j0:j1]
                )
                g = off[:, :, None] + ((ck.tilt_c * ck.sd)[j0:j1])[None, :, None] * z
                idx, nf = _race_select(_complement_weights(g), inv_e)
                n_fallback += nf
                zsel = np.take_along_axis(z, idx[..., None], axis=-1)[..., 0]
                out[k][:, cols] = (
                    ck.mu[j0:j1][None, :] + b_draws[k][:, None] + ck.sd[j0:j1][None, :] * zsel
                )
        return out, n_fallback

    # nonsampled area: tilt the area effect by E[w_i | u] - 1, units by omega
    for mp in mps:
        if mp.weight is None or mp.area_weight is None:
            raise ValidationError(
                f"area {area.area_id} is nonsampled: weight and area-weight models required"
            )
    zu = rng.standard_normal((L, pool_size))
    inv_eu = 1.0 / np.maximum(rng.exponential(size=(L, pool_size)), tiny)
    b_draws = []
    for mp in mps:
        aw = mp.area_weight
        upool = math.sqrt(mp.ner.sigma2_u) * zu
        g = aw.lambda0 + aw.lambda1 * upool + 0.5 * aw.tau2
        idx, nf = _race_select(_complement_weights(g), inv_eu)
        n_fallback += nf
        b_draws.append(np.take_along_axis(upool, idx[:, None], axis=1)[:, 0])

    x_all = area.pop_x
    v_all = area.pop_v if area.pop_v is not None else np.ones(N)
    # kappa_i of a nonsampled area is unknown; it scales all weights equally
    # and cancels in the resampling, so zero is used
    coeffs = [_AreaCoeffs(mp, x_all, v_all, 0.0) for mp in mps]
    chunk = max(1, SIR_CHUNK // max(L * pool_size, 1))
    for j0 in range(0, N, chunk):
        j1 = min(j0 + chunk, N)
        mc = j1 - j0
        z = rng.standard_normal((L, mc, pool_size))
        gum = -np.log(np.maximum(rng.exponential(size=(L, mc, pool_size)), tiny))
        for k in range(K):
            ck = coeffs[k]
            # weights omega = exp(g) are positive; terms constant over the pool
            # drop out of the argmax, leaving the (tilt_c * sd) z part
            score = ((ck.tilt_c * ck.sd)[j0:j1])[None, :, None] * z + gum
            idx = np.argmax(score, axis=-1)
            zsel = np.take_along_axis(z, idx[..., None], axis=-1)[..., 0]
            out[k][:, j0:j1] = (
                ck.mu[j0:j1][None, :] + b_draws[k][:, None] + ck.sd[j0:j1][None, :] * zsel
            )
    return out, n_fallback


def sir_y_matrix(
    params: ModelParams,
    area: AreaData,
    u_mean: float,
    u_var: float,
    L: int,
    pool_size: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """(L, N_i) conditional population draws for one area; second element is
    the SIR fallback count."""
    y, nf = sir_area_batch([params], [(u_mean, u_var)], area, L, pool_size, rng)
    return y[0], nf


def sir_draw_sampled_area(
    params: ModelParams,
    data: SampleDataset,
    area_id: int,
    pool_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One draw of the nonsampled responses of a sampled area."""
    area = data.area(area_id)
    if not area.sampled:
        raise ValidationError(f"area {area_id} is not sampled")
    u_hat, v2_hat = conditional_effects(params.ner, data)
    y, nf = sir_y_matrix(params, area, u_hat[area_id], v2_hat[area_id], 1, pool_size, rng)
    if nf:
        warnings.warn(f"area {area_id}: {nf} SIR pools had all-zero weights (unweighted fallback)")
    return y[0, ~area.sampled_mask]


def sir_draw_nonsampled_area(
    params: ModelParams,
    data: SampleDataset,
    area_id: int,
    pool_size: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """One full-length draw of the responses of a nonsampled area."""
    area = data.area(area_id)
    if area.sampled:
        raise ValidationError(f"area {area_id} is sampled")
    y, nf = sir_y_matrix(params, area, 0.0, params.ner.sigma2_u, 1, pool_size, rng)
    if nf:
        warnings.warn(f"area {area_id}: {nf} SIR pools had all-zero weights (unweighted fallback)")
    return y[0]


# --- jackknife covariance and parameter bootstrap ----------------------------


@dataclass
class JackknifeCov:
    """Block-diagonal leave-one-area-out covariance of the parameter vector.

    The s-block covers (beta, sigma2_u, sigma2_e, gamma2, gamma3); the
    ns-block covers (lambda0, lambda1, tau2).  jacobian_diag holds the
    delta-method scale factors of the log transform applied to the variance
    components.
    """

    v_s: np.ndarray
    v_ns: np.ndarray
    jacobian_diag: np.ndarray
    p: int
    r: int

    @staticmethod
    def zero(psi: "ModelParams", p: int, r: int) -> "JackknifeCov":
        k = p + 3 + r
        return JackknifeCov(
            v_s=np.zeros((k, k)),
            v_ns=np.zeros((3, 3)),
            jacobian_diag=_jacobian_diag(psi, p, r),
            p=p,
            r=r,
        )


def _psi_s_vector(ner: NerParams, weight: WeightModelParams) -> np.ndarray:
    return np.concatenate(
        [ner.beta, [ner.sigma2_u, ner.sigma2_e, weight.gamma2], weight.gamma3]
    )


def _jacobian_diag(psi: ModelParams, p: int, r: int) -> np.ndarray:
    """Delta-method scale factors of the log transform; an entry is infinite
    when the corresponding variance component sits on the zero boundary."""
    ner, aw = psi.ner, psi.area_weight
    with np.errstate(divide="ignore"):
        inv = lambda v: np.inf if v <= 0 else 1.0 / v
        tail = [1.0, 1.0, inv(aw.tau2)] if aw is not None else [1.0, 1.0, 1.0]
        return np.concatenate(
            [np.ones(p), [inv(ner.sigma2_u), inv(ner.sigma2_e), 1.0], np.ones(r), tail]
        )


def jackknife_cov(
    data: SampleDataset,
    fit: FittedNer | None = None,
    weight: WeightModelParams | None = None,
    area_weight: AreaWeightParams | None = None,
    interaction: bool = False,
) -> JackknifeCov:
    """Leave-one-area-out covariance of the parameter estimators.

    Each deletion refits the response model and the unit-weight regression
    without that area; the area-weight model is refitted with the conditional
    moments of u held at the full-data fit.
    """
    sampled = data.sampled_areas
    d = len(sampled)
    if d < 3:
        raise ValidationError("jackknife requires at least 3 sampled areas")
    if fit is None:
        fit = fit_ml(data)
    if weight is None:
        weight = fit_weight_model(data, interaction=interaction)
    have_aw = all(a.area_weight is not None for a in sampled)
    if area_weight is None and have_aw:
        area_weight = fit_area_weight_model(data, fit)

    p = data.p
    r = weight.gamma3.size
    psi_s_rows = []
    psi_ns_rows = []
    failures = []
    aw_ids = [a.area_id for a in sampled] if area_weight is not None else []
    logw_all = (
        np.array([np.log(data.area(i).area_weight) for i in aw_ids]) if aw_ids else None
    )
    u_all = np.array([fit.u_hat[i] for i in aw_ids]) if aw_ids else None
    v2_all = np.array([fit.v2_hat[i] for i in aw_ids]) if aw_ids else None

    for drop in sampled:
        keep = [a for a in data.areas if a.area_id != drop.area_id]
        sub = SampleDataset(keep)
        try:
            sub_fit = _fit_from_stats(NerStats(sub), None, start=fit.params)
            sub_w = fit_weight_model(sub, interaction=interaction)
            psi_s_rows.append(_psi_s_vector(sub_fit.params, sub_w))
            if area_weight is not None:
                keep_mask = np.array([i != drop.area_id for i in aw_ids])
                sub_aw = _fit_area_weight(
                    logw_all[keep_mask], u_all[keep_mask], v2_all[keep_mask], start=area_weight
                )
                psi_ns_rows.append([sub_aw.lambda0, sub_aw.lambda1, sub_aw.tau2])
        except (EstimationError, ValidationError) as exc:
            failures.append((drop.area_id, str(exc)))
    if failures:
        raise EstimationError(
            f"jackknife refits failed for areas {[f[0] for f in failures]}: {failures[0][1]}"
        )

    s = np.asarray(psi_s_rows)
    vs = (d - 1) / d * (s - s.mean(axis=0)).T @ (s - s.mean(axis=0))
    if psi_ns_rows:
        ns = np.asarray(psi_ns_rows)
        vns = (d - 1) / d * (ns - ns.mean(axis=0)).T @ (ns - ns.mean(axis=0))
    else:
        vns = np.zeros((3, 3))
    psi = ModelParams(ner=fit.params, weight=weight, area_weight=area_weight)
    return JackknifeCov(v_s=vs, v_ns=vns, jacobian_diag=_jacobian_diag(psi, p, r), p=p, r=r)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def param_bootstrap_draws(
    psi_hat: ModelParams,
    cov: JackknifeCov,
    B: int,
    rng: np.random.Generator,
) -> list[ModelParams]:
    """Draw B parameter vectors from the transformed-normal approximation.

    The estimate is mapped to the log scale on (sigma2_u, sigma2_e, tau2),
    the covariance mapped by the diagonal Jacobian, B multivariate normals
    drawn, and the result exponentiated back, so variance components are
    strictly positive.
    """
    if psi_hat.weight is None:
        raise ValidationError("full model parameters required")
    if not np.all(np.isfinite(cov.jacobian_diag)):
        raise EstimationError(
            "log transform undefined: a variance component estimate is on the zero boundary"
        )
    p, r = cov.p, cov.r
    ner, w, aw = psi_hat.ner, psi_hat.weight, psi_hat.area_weight
    center_s = np.concatenate(
        [ner.beta, [math.log(ner.sigma2_u), math.log(ner.sigma2_e), w.gamma2], w.gamma3]
    )
    j_s = cov.jacobian_diag[: p + 3 + r]
    a_s = _psd_sqrt(j_s[:, None] * cov.v_s * j_s[None, :])
    if aw is not None:
        center_ns = np.array([aw.lambda0, aw.lambda1, math.log(aw.tau2)])
        j_ns = cov.jacobian_diag[p + 3 + r :]
        a_ns = _psd_sqrt(j_ns[:, None] * cov.v_ns * j_ns[None, :])
    out = []
    for _ in range(B):
        ts = center_s + a_s @ rng.standard_normal(p + 3 + r)
        ner_b = NerParams(
            beta=ts[:p],
            sigma2_u=float(np.exp(np.clip(ts[p], -700, 700))),
            sigma2_e=float(np.exp(np.clip(ts[p + 1], -700, 700))),
        )
        w_b = replace(w, gamma2=float(ts[p + 2]), gamma3=ts[p + 3 :].copy())
        aw_b = None
        if aw is not None:
            tn = center_ns + a_ns @ rng.standard_normal(3)
            aw_b = AreaWeightParams(
                lambda0=float(tn[0]),
                lambda1=float(tn[1]),
                tau2=float(np.exp(np.clip(tn[2], -700, 700))),
            )
        out.append(ModelParams(ner=ner_b, weight=w_b, area_weight=aw_b))
    return out


# --- informative bootstrap MSE ------------------------------------------------


def informative_bootstrap_multi(
    params: ModelParams,
    cov: JackknifeCov,
    data: SampleDataset,
    param_list: list[AreaParameter],
    L: int,
    B: int,
    pool_size: int,
    rng_seed: int,
    keep_draws: bool = True,
) -> tuple[dict[str, dict[int, EbpDraws]], dict[str, BootstrapSet], int]:
    """Base draws plus parameter-bootstrap replicates for several functionals.

    Returns (base draws, bootstrap sets, SIR fallback count).  Index 0 of the
    shared noise batch is the base parameter vector; replicate k > 0 uses the
    k-th transformed-normal parameter draw.
    """
    if B < 2:
        raise ValidationError("B must be at least 2")
    pred_areas = [a for a in data.areas if a.pop_x is not None]
    if not pred_areas:
        raise ValidationError("no areas with population covariates to predict")
    psi_b = param_bootstrap_draws(params, cov, B, derive(rng_seed, "psi_boot"))
    mps = [params] + psi_b
    eff = [conditional_effects(mp.ner, data) for mp in mps]

    n_fallback = 0
    base_draws: dict[str, dict[int, EbpDraws]] = {p.name: {} for p in param_list}
    acc = {
        p.name: {a.area_id: ([], [], [] if keep_draws else None) for a in pred_areas}
        for p in param_list
    }
    for area in pred_areas:
        rng = derive(rng_seed, "draws", area.area_id)
        effects = [(u[area.area_id], v[area.area_id]) for (u, v) in eff]
        y_all, nf = sir_area_batch(mps, effects, area, L, pool_size, rng)
        n_fallback += nf
        for k in range(len(mps)):
            vals = evaluate_many(param_list, y_all[k])
            for p in param_list:
                th = vals[p.name]
                if k == 0:
                    base_draws[p.name][area.area_id] = EbpDraws(
                        area_id=area.area_id, draws=th, params_used=params, rng_seed=rng_seed
                    )
                else:
                    th_list, m1_list, dr_list = acc[p.name][area.area_id]
                    th_list.append(th.mean())
                    m1_list.append(th.var(ddof=1))
                    if dr_list is not None:
                        dr_list.append(th)
    boots = {}
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
        boots[p.name] = BootstrapSet(params_b=psi_b, areas=areas, b_requested=B, n_dropped=0)
    return base_draws, boots, n_fallback


def mse_informative(
    params: ModelParams,
    cov: JackknifeCov,
    data: SampleDataset,
    param: AreaParameter,
    L: int,
    B: int,
    pool_size: int,
    rng_seed: int,
) -> dict[int, MseReport]:
    """Per-area MSE reports under the informative model."""
    base, boots, _ = informative_bootstrap_multi(
        params, cov, data, [param], L, B, pool_size, rng_seed, keep_draws=False
    )
    out = {}
    for aid, draws in base[param.name].items():
        out[aid] = mse_report(draws, boots[param.name].areas[aid])
    return out
