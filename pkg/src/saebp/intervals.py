"""Prediction intervals for area parameters.

Three families: the naive quantile interval of the prediction draws, the
bootstrap-calibrated interval (the naive interval re-tuned so that the
bootstrap-averaged coverage of the original draws hits the nominal level),
and symmetric normal-theory intervals built from an MSE estimate.

The calibration coverage criterion is

    (B L)^-1 sum_b sum_l 1{ q_{a/2}(b) <= theta^(l) <= q_{1-a/2}(b) } = 1 - alpha,

a nonincreasing step function of a.  We return the largest grid value of a
whose coverage is still >= 1 - alpha (conservative, deterministic).  Each
(l, b) pair contributes a cutoff a*_{lb} = sup{a : theta^(l) inside the
replicate-b quantile interval}; the solution is an order statistic of these
cutoffs, computed exactly (ties in the draws included) rather than by
scanning the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .ebp import EbpDraws
from .model import ValidationError
from .params import quantile_jw

__all__ = [
    "IntervalReport",
    "naive_ci",
    "calibrated_ci",
    "calibrated_alpha_prime",
    "coverage_alpha_star",
    "normal_ci",
    "ALPHA_GRID",
]

ALPHA_GRID = 1e-4


@dataclass
class IntervalReport:
    area_id: int
    kind: str
    lower: float
    upper: float
    nominal: float
    alpha_prime: float | None = None
    degenerate: bool = False

    def covers(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


def naive_ci(draws: EbpDraws, alpha: float) -> IntervalReport:
    """Equal-tailed quantile interval of the prediction draws."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0,1), got {alpha}")
    values = draws.draws
    if values.size < 2.0 / alpha:
        raise ValidationError(
            f"naive interval at alpha={alpha} needs L >= {2.0 / alpha:.0f} draws, got {values.size}"
        )
    return IntervalReport(
        area_id=draws.area_id,
        kind="naive",
        lower=quantile_jw(values, alpha / 2.0),
        upper=quantile_jw(values, 1.0 - alpha / 2.0),
        nominal=1.0 - alpha,
    )


def coverage_alpha_star(replicate_draws_sorted: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Per-point calibration cutoffs against one replicate draw set.

    For each theta value, returns the largest a such that theta lies in
    [q_{a/2}, q_{1-a/2}] of the (sorted) replicate draws; 0 if theta falls
    outside their range entirely.
    """
    s = replicate_draws_sorted
    theta = np.asarray(theta, dtype=float)
    n = s.size
    if n == 1:
        return np.where(theta == s[0], 1.0, 0.0)
    r = np.searchsorted(s, theta, side="right")  # count of draws <= theta
    l = np.searchsorted(s, theta, side="left")  # count of draws < theta

    # p_lo = sup{p : q(p) <= theta}
    j = np.clip(r - 1, 0, n - 2)
    denom = s[j + 1] - s[j]
    frac = np.where(denom > 0, (theta - s[j]) / np.where(denom > 0, denom, 1.0), 0.0)
    p_lo = np.where(r == n, 1.0, (j + np.clip(frac, 0.0, 1.0)) / (n - 1))

    # p_hi = inf{p : q(p) >= theta}
    k = np.clip(l, 1, n - 1)
    denom2 = s[k] - s[k - 1]
    frac2 = np.where(denom2 > 0, (theta - s[k - 1]) / np.where(denom2 > 0, denom2, 1.0), 1.0)
    p_hi = np.where(l == 0, 0.0, (k - 1 + np.clip(frac2, 0.0, 1.0)) / (n - 1))

    a_star = np.minimum(2.0 * p_lo, 2.0 * (1.0 - p_hi))
    a_star = np.where((r == 0) | (l == n), 0.0, a_star)
    return np.clip(a_star, 0.0, 1.0)


def calibrated_alpha_prime(
    draws: np.ndarray,
    replicate_draws: np.ndarray,
    alpha: float,
    grid: float = ALPHA_GRID,
) -> tuple[float, bool]:
    """Solve the calibration equation; returns (alpha_prime, degenerate_flag).

    ``replicate_draws`` has one row of draws per bootstrap replicate.  The
    degenerate flag is set when even the widest quantile interval cannot reach
    the nominal coverage.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0,1), got {alpha}")
    replicate_draws = np.atleast_2d(replicate_draws)
    cutoffs = np.concatenate(
        [coverage_alpha_star(np.sort(row), draws) for row in replicate_draws]
    )
    total = cutoffs.size
    need = math.ceil((1.0 - alpha) * total)
    need = min(max(need, 1), total)
    a_raw = float(np.partition(cutoffs, total - need)[total - need])  # need-th largest
    if a_raw <= 0.0:
        return grid, True
    a_prime = math.floor(a_raw / grid) * grid
    a_prime = min(max(a_prime, grid), 1.0 - grid)
    return a_prime, False


def calibration_coverage(draws: np.ndarray, replicate_draws: np.ndarray, a: float) -> float:
    """Bootstrap-averaged coverage of the original draws at interval level a."""
    replicate_draws = np.atleast_2d(replicate_draws)
    cutoffs = np.concatenate(
        [coverage_alpha_star(np.sort(row), draws) for row in replicate_draws]
    )
    return float(np.mean(cutoffs >= a))


def calibrated_ci(draws: EbpDraws, replicates, alpha: float) -> IntervalReport:
    """Calibrated interval: endpoints are quantiles of the original draws at
    the re-tuned level alpha_prime."""
    if isinstance(replicates, np.ndarray):
        rep_draws = replicates
    else:
        rows = replicates.draws_b if hasattr(replicates, "draws_b") else [r.draws for r in replicates]
        if rows is None or any(r is None for r in rows):
            raise ValidationError("calibration requires per-replicate draw sets")
        rep_draws = np.asarray(rows, dtype=float)
    a_prime, degenerate = calibrated_alpha_prime(draws.draws, rep_draws, alpha)
    if degenerate:
        lower, upper = float(np.min(draws.draws)), float(np.max(draws.draws))
    else:
        lower = quantile_jw(draws.draws, a_prime / 2.0)
        upper = quantile_jw(draws.draws, 1.0 - a_prime / 2.0)
    return IntervalReport(
        area_id=draws.area_id,
        kind="calibrated",
        lower=lower,
        upper=upper,
        nominal=1.0 - alpha,
        alpha_prime=a_prime,
        degenerate=degenerate,
    )


def normal_ci(
    theta_hat: float, mse_value: float, alpha: float, area_id: int = -1, variant: str = ""
) -> IntervalReport:
    """Symmetric normal-theory interval theta_hat +/- z_{1-alpha/2} sqrt(mse)."""
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must be in (0,1), got {alpha}")
    if not math.isfinite(mse_value) or mse_value < 0.0:
        raise ValidationError(
            f"normal interval undefined for MSE estimate {mse_value!r}"
        )
    half = float(norm.ppf(1.0 - alpha / 2.0)) * math.sqrt(mse_value)
    kind = f"normal:{variant}" if variant else "normal"
    return IntervalReport(
        area_id=area_id,
        kind=kind,
        lower=theta_hat - half,
        upper=theta_hat + half,
        nominal=1.0 - alpha,
    )
