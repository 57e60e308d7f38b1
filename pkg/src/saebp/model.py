"""Nested error linear regression model for unit-level small area estimation.

The model for unit j in area i is

    y_ij = x_ij' beta + u_i + e_ij,
    u_i ~ N(0, sigma2_u),  e_ij ~ N(0, sigma2_e / v_ij),

with v_ij a known positive variance scale (1 by default).  This module holds
the dataset containers, the maximum likelihood fit (beta profiled out by GLS,
2-d simplex search over log variance components), the conditional
distribution of the area effect given the sample, probability-integral
residual diagnostics, and a synthetic population generator with truncated
normal errors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .rng import derive

__all__ = [
    "UnitRecord",
    "AreaData",
    "SampleDataset",
    "NerParams",
    "FittedNer",
    "EstimationError",
    "ValidationError",
    "fit_ml",
    "conditional_effect",
    "conditional_effects",
    "generalized_residuals",
    "PopulationDesign",
    "Population",
    "simulate_population",
    "truncated_normal",
]


class ValidationError(ValueError):
    """Invalid input data or configuration."""


class EstimationError(RuntimeError):
    """Numerical failure during model estimation.

    Carries the last iterate in ``last_fit`` when the optimizer ran out of
    iterations, so callers (e.g. bootstrap loops) can inspect or drop it.
    """

    def __init__(self, message: str, last_fit: "FittedNer | None" = None):
        super().__init__(message)
        self.last_fit = last_fit


@dataclass(frozen=True)
class UnitRecord:
    """One sampled unit: response, covariates and optional design metadata."""

    area_id: int
    unit_id: int
    y: float
    x: np.ndarray
    unit_weight: float | None = None
    variance_scale: float = 1.0

    def __post_init__(self):
        if self.variance_scale <= 0:
            raise ValidationError(
                f"variance_scale must be positive, got {self.variance_scale} "
                f"(area {self.area_id}, unit {self.unit_id})"
            )
        if self.unit_weight is not None and self.unit_weight <= 0:
            raise ValidationError(
                f"unit weight must be positive, got {self.unit_weight} "
                f"(area {self.area_id}, unit {self.unit_id})"
            )


@dataclass
class AreaData:
    """Per-area sample arrays plus the population covariate frame.

    ``y, x, v, unit_ids, unit_weights`` hold the n_i sampled units.  ``pop_x``
    holds covariates for all N_i population units; ``sampled_mask`` marks the
    rows of ``pop_x`` that correspond (in order) to the sampled units.  Areas
    with no sampled units are represented with empty sample arrays.
    """

    area_id: int
    y: np.ndarray
    x: np.ndarray
    v: np.ndarray
    unit_ids: np.ndarray
    unit_weights: np.ndarray | None = None
    area_weight: float | None = None
    pop_x: np.ndarray | None = None
    pop_v: np.ndarray | None = None
    sampled_mask: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def sampled(self) -> bool:
        return self.n > 0

    @property
    def pop_size(self) -> int:
        if self.pop_x is None:
            raise ValidationError(f"area {self.area_id}: population covariates unavailable")
        return self.pop_x.shape[0]

    def validate(self, p: int) -> None:
        if self.x.ndim != 2 or self.x.shape != (self.n, p):
            raise ValidationError(f"area {self.area_id}: covariate block has wrong shape")
        if np.any(self.v <= 0):
            raise ValidationError(f"area {self.area_id}: variance scales must be positive")
        if self.unit_weights is not None and np.any(self.unit_weights <= 0):
            raise ValidationError(f"area {self.area_id}: unit weights must be positive")
        if self.area_weight is not None and self.area_weight <= 0:
            raise ValidationError(f"area {self.area_id}: area weight must be positive")
        if len(set(self.unit_ids.tolist())) != self.n:
            raise ValidationError(f"area {self.area_id}: duplicate unit ids")
        if self.pop_x is not None:
            if self.pop_x.shape[1] != p:
                raise ValidationError(f"area {self.area_id}: population covariate width mismatch")
            if self.n > self.pop_x.shape[0]:
                raise ValidationError(f"area {self.area_id}: n_i exceeds N_i")
            if self.sampled_mask is None:
                raise ValidationError(f"area {self.area_id}: sampled_mask required with pop_x")
            if self.sampled_mask.shape[0] != self.pop_x.shape[0]:
                raise ValidationError(f"area {self.area_id}: sampled_mask length mismatch")
            if int(self.sampled_mask.sum()) != self.n:
                raise ValidationError(
                    f"area {self.area_id}: sampled_mask marks {int(self.sampled_mask.sum())} "
                    f"rows but {self.n} units are sampled"
                )
            if self.pop_v is not None and self.pop_v.shape[0] != self.pop_x.shape[0]:
                raise ValidationError(f"area {self.area_id}: pop_v length mismatch")


class SampleDataset:
    """Collection of areas with sampled records and population covariates."""

    def __init__(self, areas: list[AreaData]):
        if not areas:
            raise ValidationError("dataset has no areas")
        self.areas = areas
        self.by_id = {a.area_id: a for a in areas}
        if len(self.by_id) != len(areas):
            raise ValidationError("duplicate area ids")
        sampled = [a for a in areas if a.sampled]
        if not sampled:
            raise ValidationError("dataset has no sampled areas")
        self.p = sampled[0].x.shape[1]
        for a in areas:
            a.validate(self.p)

    @property
    def sampled_areas(self) -> list[AreaData]:
        return [a for a in self.areas if a.sampled]

    @property
    def n_total(self) -> int:
        return sum(a.n for a in self.areas)

    def area(self, area_id: int) -> AreaData:
        try:
            return self.by_id[area_id]
        except KeyError:
            raise ValidationError(f"unknown area id {area_id}") from None

    def with_sample_y(self, new_y: dict[int, np.ndarray]) -> "SampleDataset":
        """Copy of the dataset with sampled responses replaced (same design)."""
        areas = []
        for a in self.areas:
            if a.area_id in new_y:
                areas.append(replace(a, y=np.asarray(new_y[a.area_id], dtype=float)))
            else:
                areas.append(a)
        return SampleDataset(areas)

    @staticmethod
    def from_records(
        records: list[UnitRecord],
        population_x: dict[int, np.ndarray] | None = None,
        area_weights: dict[int, float] | None = None,
        population_v: dict[int, np.ndarray] | None = None,
        sampled_masks: dict[int, np.ndarray] | None = None,
    ) -> "SampleDataset":
        by_area: dict[int, list[UnitRecord]] = {}
        for r in records:
            by_area.setdefault(r.area_id, []).append(r)
        all_ids = set(by_area) | set(population_x or {})
        areas = []
        for aid in sorted(all_ids):
            rs = by_area.get(aid, [])
            has_w = rs and all(r.unit_weight is not None for r in rs)
            pop_x = None if population_x is None else population_x.get(aid)
            area = AreaData(
                area_id=aid,
                y=np.array([r.y for r in rs], dtype=float),
                x=np.array([r.x for r in rs], dtype=float).reshape(len(rs), -1),
                v=np.array([r.variance_scale for r in rs], dtype=float),
                unit_ids=np.array([r.unit_id for r in rs], dtype=int),
                unit_weights=np.array([r.unit_weight for r in rs], dtype=float) if has_w else None,
                area_weight=None if area_weights is None else area_weights.get(aid),
                pop_x=None if pop_x is None else np.asarray(pop_x, dtype=float),
                pop_v=None if population_v is None else population_v.get(aid),
                sampled_mask=None if sampled_masks is None else sampled_masks.get(aid),
            )
            if area.pop_x is not None and area.sampled_mask is None:
                # default convention: sampled units occupy the first n_i rows
                mask = np.zeros(area.pop_x.shape[0], dtype=bool)
                mask[: area.n] = True
                area.sampled_mask = mask
            areas.append(area)
        return SampleDataset(areas)


@dataclass(frozen=True)
class NerParams:
    """Regression coefficients and variance components of the model."""

    beta: np.ndarray
    sigma2_u: float
    sigma2_e: float

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if self.sigma2_u < 0:
            raise ValidationError(f"sigma2_u must be nonnegative, got {self.sigma2_u}")
        if self.sigma2_e <= 0:
            raise ValidationError(f"sigma2_e must be positive, got {self.sigma2_e}")


@dataclass
class FittedNer:
    """ML fit: parameter estimates, conditional effects and diagnostics."""

    params: NerParams
    loglik: float
    u_hat: dict[int, float]
    v2_hat: dict[int, float]
    iterations: int
    grad_norm: float
    converged: bool = True
    sigma2_u_on_boundary: bool = False
    degenerate: bool = False


# --- sufficient statistics -------------------------------------------------
#
# The marginal covariance of (y_i1..y_in) is V_i = sigma2_u 11' + sigma2_e
# diag(1/v_ij).  All likelihood evaluations reduce, via Woodbury, to per-area
# cross-products that are computed once per dataset: with Lam = diag(v),
#   A_i = X'Lam X, a_i = X'Lam 1, c_i = X'Lam y, d_i = 1'Lam y,
#   q_i = y'Lam y, ntil_i = 1'Lam 1.


class NerStats:
    def __init__(self, data: SampleDataset):
        areas = data.sampled_areas
        if len(areas) < 2:
            raise ValidationError("maximum likelihood fit requires at least 2 sampled areas")
        p = data.p
        if data.n_total < p + 2:
            raise ValidationError(
                f"need at least p + 2 = {p + 2} sampled units, got {data.n_total}"
            )
        self.p = p
        self.area_ids = [a.area_id for a in areas]
        D = len(areas)
        self.A = np.zeros((D, p, p))
        self.a = np.zeros((D, p))
        self.ntil = np.zeros(D)
        self.n = np.zeros(D)
        self.sumlogv = np.zeros(D)
        self._xv = []
        for k, ar in enumerate(areas):
            xv = ar.x * ar.v[:, None]
            self._xv.append((ar, xv))
            self.A[k] = ar.x.T @ xv
            self.a[k] = xv.sum(axis=0)
            self.ntil[k] = ar.v.sum()
            self.n[k] = ar.n
            self.sumlogv[k] = np.log(ar.v).sum()
        self.A_sum = self.A.sum(axis=0)
        if np.linalg.matrix_rank(self.A_sum) < p:
            raise EstimationError("singular design matrix")
        self._can_center = all(np.all(ar.x[:, 0] == 1.0) for ar, _ in self._xv)
        self.set_y([ar.y for ar, _ in self._xv])

    def set_y(self, ys: list[np.ndarray]) -> None:
        # responses are centered to avoid cancellation in the cross products;
        # the intercept column (required first covariate) absorbs the shift
        D = len(self._xv)
        self.y_center = 0.0
        if self._can_center:
            self.y_center = float(
                sum(ar.v @ y for (ar, _), y in zip(self._xv, ys)) / self.ntil.sum()
            )
        self.c = np.zeros((D, self.p))
        self.d = np.zeros(D)
        self.q = np.zeros(D)
        for k, (ar, xv) in enumerate(self._xv):
            y = ys[k] - self.y_center
            self.c[k] = xv.T @ y
            self.d[k] = ar.v @ y
            self.q[k] = ar.v @ (y * y)
        self.c_sum = self.c.sum(axis=0)

    def profile_loglik(self, sigma2_u: float, sigma2_e: float):
        """GLS-profiled log likelihood at the given variance components."""
        k = sigma2_u / (sigma2_e + sigma2_u * self.ntil)
        M = self.A_sum - np.einsum("i,ip,iq->pq", k, self.a, self.a)
        m = self.c_sum - (k * self.d) @ self.a
        try:
            beta = np.linalg.solve(M, m)
        except np.linalg.LinAlgError:
            raise EstimationError("singular GLS system") from None
        r = self.d - self.a @ beta
        quad = (
            self.q.sum()
            - 2.0 * beta @ self.c_sum
            + beta @ self.A_sum @ beta
            - np.sum(k * r * r)
        ) / sigma2_e
        logdet = (
            self.n.sum() * np.log(sigma2_e)
            - self.sumlogv.sum()
            + np.log1p(sigma2_u * self.ntil / sigma2_e).sum()
        )
        ll = -0.5 * (self.n.sum() * np.log(2.0 * np.pi) + logdet + quad)
        return ll, beta

    def boundary_fit(self):
        """Exact ML with sigma2_u fixed at 0 (weighted least squares)."""
        beta = np.linalg.solve(self.A_sum, self.c_sum)
        rss = self.q.sum() - 2.0 * beta @ self.c_sum + beta @ self.A_sum @ beta
        ntot = self.n.sum()
        sigma2_e = max(rss / ntot, 1e-300)
        ll = -0.5 * (
            ntot * np.log(2.0 * np.pi)
            + ntot * np.log(sigma2_e)
            - self.sumlogv.sum()
            + rss / sigma2_e
        )
        return ll, beta, sigma2_e

    def fixed_effects_rss(self) -> float:
        """Residual sum of squares of the regression with area fixed effects.

        Numerically zero means the likelihood is unbounded as sigma2_e -> 0."""
        A = self.A_sum - np.einsum("i,ip,iq->pq", 1.0 / self.ntil, self.a, self.a)
        c = self.c_sum - (self.d / self.ntil) @ self.a
        q = self.q.sum() - np.sum(self.d * self.d / self.ntil)
        beta, *_ = np.linalg.lstsq(A, c, rcond=None)
        return max(float(q - c @ beta), 0.0)


def _uncenter(stats: NerStats, beta: np.ndarray) -> np.ndarray:
    beta = np.array(beta, dtype=float)
    beta[0] += stats.y_center
    return beta


def _initial_variances(stats: NerStats) -> tuple[float, float]:
    # WLS residuals split into within/between components for a starting point
    beta = np.linalg.solve(stats.A_sum, stats.c_sum)
    rss = stats.q.sum() - 2.0 * beta @ stats.c_sum + beta @ stats.A_sum @ beta
    ntot = stats.n.sum()
    s2 = max(rss / ntot, 1e-12)
    rbar = (stats.d - stats.a @ beta) / stats.ntil
    between = float(np.var(rbar)) if len(rbar) > 1 else s2
    s2_e = max(0.75 * s2, 1e-12)
    s2_u = max(between - s2_e / float(np.mean(stats.ntil)), 0.05 * s2)
    return s2_u, s2_e


def fit_ml(
    data: SampleDataset,
    start: NerParams | None = None,
    max_iter: int = 500,
) -> FittedNer:
    """Fit the model by maximum likelihood.

    beta is profiled out by generalized least squares; the 2-d search over
    (log sigma2_u, log sigma2_e) uses Nelder-Mead.  A boundary solution
    sigma2_u = 0 is detected and reported exactly.
    """
    stats = NerStats(data)
    return _fit_from_stats(stats, data, start=start, max_iter=max_iter)


def _fit_from_stats(
    stats: NerStats,
    data: SampleDataset,
    start: NerParams | None = None,
    max_iter: int = 500,
) -> FittedNer:
    if start is not None and start.sigma2_u > 0:
        t0 = np.log([start.sigma2_u, start.sigma2_e])
    else:
        s2_u, s2_e = _initial_variances(stats)
        t0 = np.log([s2_u, s2_e])

    scale_y = max(
        float(np.mean(stats.q / np.maximum(stats.n, 1))), stats.y_center**2, 1e-30
    )
    if stats.fixed_effects_rss() <= 1e-12 * stats.n.sum() * scale_y:
        return _degenerate_fit(stats, data, scale_y)

    def neg_ll(t):
        t = np.clip(t, -60.0, 60.0)
        ll, _ = stats.profile_loglik(np.exp(t[0]), np.exp(t[1]))
        return -ll if np.isfinite(ll) else 1e300

    # convergence criterion: relative log-likelihood change below 1e-10
    ftol = 1e-10 * (1.0 + abs(neg_ll(t0)))
    res = minimize(
        neg_ll,
        t0,
        method="Nelder-Mead",
        options=dict(maxiter=max_iter, xatol=1e-8, fatol=ftol),
    )
    fvals = res.final_simplex[1]
    converged = bool(res.success) or float(np.ptp(fvals)) <= 1e-10 * (1.0 + abs(res.fun))
    t = np.clip(res.x, -60.0, 60.0)
    sigma2_u, sigma2_e = float(np.exp(t[0])), float(np.exp(t[1]))
    ll, beta = stats.profile_loglik(sigma2_u, sigma2_e)

    # boundary check: the exact sigma2_u = 0 profile may beat the interior point
    ll0, beta0, s2e0 = stats.boundary_fit()
    on_boundary = False
    if ll0 >= ll - 1e-8 or sigma2_u < 1e-12 * sigma2_e:
        sigma2_u, sigma2_e, beta, ll = 0.0, s2e0, beta0, ll0
        on_boundary = True

    if not converged and not on_boundary:
        params = NerParams(beta=_uncenter(stats, beta), sigma2_u=sigma2_u, sigma2_e=sigma2_e)
        u_hat, v2_hat = conditional_effects(params, data) if data is not None else ({}, {})
        last = FittedNer(
            params=params, loglik=float(ll), u_hat=u_hat, v2_hat=v2_hat,
            iterations=res.nit, grad_norm=float("nan"), converged=False,
        )
        raise EstimationError(
            f"ML fit did not converge in {max_iter} iterations", last_fit=last
        )

    # forward-difference gradient of the profiled log likelihood, diagnostics only
    h = 1e-6
    if sigma2_u > 0:
        g0 = (stats.profile_loglik(sigma2_u * (1 + h), sigma2_e)[0] - ll) / (np.log1p(h))
    else:
        g0 = 0.0
    g1 = (stats.profile_loglik(max(sigma2_u, 1e-300), sigma2_e * (1 + h))[0] - ll) / (np.log1p(h))
    grad_norm = float(np.hypot(g0, g1))

    params = NerParams(beta=_uncenter(stats, beta), sigma2_u=sigma2_u, sigma2_e=sigma2_e)
    u_hat, v2_hat = conditional_effects(params, data) if data is not None else ({}, {})
    return FittedNer(
        params=params,
        loglik=float(ll),
        u_hat=u_hat,
        v2_hat=v2_hat,
        iterations=int(res.nit),
        grad_norm=grad_norm,
        converged=True,
        sigma2_u_on_boundary=on_boundary,
        degenerate=False,
    )


def _degenerate_fit(stats: NerStats, data: SampleDataset | None, scale_y: float) -> FittedNer:
    """Boundary solution when the within-area residual variation is zero.

    sigma2_e is pinned at a small floor and sigma2_u profiled over it; the
    fit is flagged degenerate."""
    s2e = 1e-12 * scale_y + 1e-300

    def neg_ll(t):
        try:
            ll, _ = stats.profile_loglik(float(np.exp(np.clip(t[0], -60.0, 60.0))), s2e)
        except EstimationError:
            return 1e300
        return -ll if np.isfinite(ll) else 1e300

    res = minimize(
        neg_ll,
        [np.log(max(_initial_variances(stats)[0], 1e-10))],
        method="Nelder-Mead",
        options=dict(maxiter=500, xatol=1e-12, fatol=1e-12),
    )
    s2u = float(np.exp(np.clip(res.x[0], -60.0, 60.0)))
    ll, beta = stats.profile_loglik(s2u, s2e)
    ll0, beta0 = stats.profile_loglik(0.0, s2e)
    on_boundary = False
    if ll0 >= ll - 1e-8 or s2u < 1e-12 * s2e:
        s2u, beta, ll = 0.0, beta0, ll0
        on_boundary = True
    params = NerParams(beta=_uncenter(stats, beta), sigma2_u=s2u, sigma2_e=s2e)
    u_hat, v2_hat = conditional_effects(params, data) if data is not None else ({}, {})
    return FittedNer(
        params=params,
        loglik=float(ll),
        u_hat=u_hat,
        v2_hat=v2_hat,
        iterations=int(res.nit),
        grad_norm=float("nan"),
        converged=True,
        sigma2_u_on_boundary=on_boundary,
        degenerate=True,
    )


def conditional_effects(
    params: NerParams, data: SampleDataset
) -> tuple[dict[int, float], dict[int, float]]:
    """Conditional mean and variance of the area effect for every area.

    For a sampled area, u_i | y ~ N(g_i (ybar_i - xbar_i' beta), sigma2_u (1 - g_i))
    with g_i = sigma2_u / (sigma2_u + sigma2_e / ntil_i) and ybar, xbar, ntil
    computed with variance-scale weights.  Unsampled areas get the prior (0,
    sigma2_u).
    """
    u_hat: dict[int, float] = {}
    v2_hat: dict[int, float] = {}
    s2u, s2e = params.sigma2_u, params.sigma2_e
    for a in data.areas:
        mean, var = _area_effect(params, a, s2u, s2e)
        u_hat[a.area_id] = mean
        v2_hat[a.area_id] = var
    return u_hat, v2_hat


def _area_effect(params: NerParams, a: AreaData, s2u: float, s2e: float) -> tuple[float, float]:
    if not a.sampled:
        return 0.0, s2u
    if s2u == 0.0:
        return 0.0, 0.0
    ntil = a.v.sum()
    ybar = (a.v @ a.y) / ntil
    xbar = (a.v[:, None] * a.x).sum(axis=0) / ntil
    g = s2u / (s2u + s2e / ntil)
    return float(g * (ybar - xbar @ params.beta)), float(s2u * (1.0 - g))


def conditional_effect(
    fit: FittedNer | NerParams, data: SampleDataset, area_id: int
) -> tuple[float, float]:
    """Conditional (mean, variance) of the random effect for one area."""
    params = fit.params if isinstance(fit, FittedNer) else fit
    area = data.area(area_id)
    return _area_effect(params, area, params.sigma2_u, params.sigma2_e)


def generalized_residuals(fit: FittedNer, data: SampleDataset) -> dict[int, np.ndarray]:
    """Probability-integral-transform residuals, approximately U(0,1) under the model."""
    out: dict[int, np.ndarray] = {}
    sd = np.sqrt(fit.params.sigma2_e)
    for a in data.sampled_areas:
        z = (a.y - a.x @ fit.params.beta - fit.u_hat[a.area_id]) * np.sqrt(a.v) / sd
        out[a.area_id] = norm.cdf(z)
    return out


# --- synthetic populations ---------------------------------------------------


@dataclass(frozen=True)
class PopulationDesign:
    """Generative description of a finite population of D areas."""

    n_areas: int
    area_size: int
    beta: tuple[float, ...] = (5.0, 0.1)
    sigma_u: float = 0.3
    sigma_e: float = 0.3
    truncate: float | None = 2.5  # in units of the component sd; None = exact normal


@dataclass
class Population:
    x: list[np.ndarray]  # per area, (N_i, p)
    y: list[np.ndarray]  # per area, (N_i,)
    u: np.ndarray  # (D,)
    design: PopulationDesign

    @property
    def n_areas(self) -> int:
        return len(self.y)


def truncated_normal(
    rng: np.random.Generator, sd: float, size, c: float | None = 2.5
) -> np.ndarray:
    """Draw N(0, sd^2) truncated to |z| <= c*sd by rejection (acceptance ~0.9876)."""
    out = rng.normal(0.0, sd, size=size)
    if c is None or sd == 0.0:
        return out
    bound = c * sd
    bad = np.abs(out) > bound
    while np.any(bad):
        out[bad] = rng.normal(0.0, sd, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out


def draw_covariates(design: PopulationDesign, rng: np.random.Generator) -> list[np.ndarray]:
    """Intercept plus U(0,1) covariates, one matrix per area."""
    p = len(design.beta)
    xs = []
    for _ in range(design.n_areas):
        x = np.ones((design.area_size, p))
        if p > 1:
            x[:, 1:] = rng.uniform(0.0, 1.0, size=(design.area_size, p - 1))
        xs.append(x)
    return xs


def simulate_population(
    design: PopulationDesign,
    rng_seed: int = 0,
    x_fixed: list[np.ndarray] | None = None,
    rng: np.random.Generator | None = None,
) -> Population:
    """Generate a finite population; pass ``x_fixed`` to keep covariates fixed
    across Monte Carlo replicates."""
    if rng is None:
        rng = derive(rng_seed, "population")
    if x_fixed is None:
        xs = draw_covariates(design, derive(rng_seed, "covariates"))
    else:
        xs = x_fixed
    beta = np.asarray(design.beta, dtype=float)
    u = truncated_normal(rng, design.sigma_u, design.n_areas, design.truncate)
    if design.sigma_u == 0.0:
        u = np.zeros(design.n_areas)
    ys = []
    for i in range(design.n_areas):
        e = truncated_normal(rng, design.sigma_e, xs[i].shape[0], design.truncate)
        ys.append(xs[i] @ beta + u[i] + e)
    return Population(x=xs, y=ys, u=u, design=design)
