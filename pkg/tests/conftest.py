"""Shared dataset builders and oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from saebp.model import AreaData, PopulationDesign, SampleDataset, simulate_population
from saebp.rng import derive


def dataset_from_population(pop, n_sizes, seed, unit_weights=None, area_weights=None):
    """SRS n_i units per area from a generated population."""
    rng = derive(seed, "test-sampling")
    areas = []
    for i in range(pop.n_areas):
        N = pop.y[i].size
        n_i = int(n_sizes[i % len(n_sizes)]) if np.ndim(n_sizes) else int(n_sizes)
        sel = np.sort(rng.choice(N, n_i, replace=False))
        mask = np.zeros(N, dtype=bool)
        mask[sel] = True
        areas.append(
            AreaData(
                area_id=i,
                y=pop.y[i][sel],
                x=pop.x[i][sel],
                v=np.ones(n_i),
                unit_ids=sel,
                unit_weights=None if unit_weights is None else np.full(n_i, float(unit_weights)),
                area_weight=None if area_weights is None else float(area_weights),
                pop_x=pop.x[i],
                sampled_mask=mask,
            )
        )
    return SampleDataset(areas)


def simulate_dataset(
    seed,
    D=12,
    N=40,
    n_sizes=(5, 10, 15),
    beta=(5.0, 0.1),
    sigma_u=0.3,
    sigma_e=0.3,
    truncate=2.5,
    unit_weights=None,
    area_weights=None,
):
    design = PopulationDesign(
        n_areas=D, area_size=N, beta=beta, sigma_u=sigma_u, sigma_e=sigma_e, truncate=truncate
    )
    pop = simulate_population(design, seed)
    data = dataset_from_population(
        pop, n_sizes, seed, unit_weights=unit_weights, area_weights=area_weights
    )
    return data, pop


@pytest.fixture
def small_dataset():
    data, _ = simulate_dataset(42)
    return data


# --- independent oracles -------------------------------------------------------


def balanced_ml_oracle(y: np.ndarray):
    """Closed-form ML for the balanced one-way random effects model.

    y has shape (D, n).  Returns (mu, sigma2_u, sigma2_e)."""
    D, n = y.shape
    mu = y.mean()
    ybar = y.mean(axis=1)
    ssw = ((y - ybar[:, None]) ** 2).sum()
    ssb = n * ((ybar - mu) ** 2).sum()
    s2e = ssw / (D * (n - 1))
    lam = ssb / D
    if lam >= s2e:
        s2u = (lam - s2e) / n
    else:
        s2u = 0.0
        s2e = (ssw + ssb) / (D * n)
    return mu, s2u, s2e


def dense_loglik_oracle(data, beta, sigma2_u, sigma2_e):
    """Marginal Gaussian log likelihood via dense per-area covariance matrices."""
    from scipy.stats import multivariate_normal

    total = 0.0
    for a in data.sampled_areas:
        V = sigma2_u * np.ones((a.n, a.n)) + sigma2_e * np.diag(1.0 / a.v)
        total += multivariate_normal.logpdf(a.y, mean=a.x @ np.asarray(beta), cov=V)
    return total


def gini_double_sum(values: np.ndarray) -> float:
    w = np.exp(np.asarray(values, dtype=float))
    n = w.size
    return float(np.abs(w[:, None] - w[None, :]).sum() / (2.0 * n * n * w.mean()))


def poverty_gap_direct(values: np.ndarray, z: float) -> float:
    w = np.exp(np.asarray(values, dtype=float))
    return float(np.mean(((z - w) / z) * (w < z)))


def quantile_type7(values: np.ndarray, p: float) -> float:
    return float(np.quantile(np.asarray(values, dtype=float), p, method="linear"))


def two_pass_variance(values: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    m = values.mean()
    return float(((values - m) ** 2).sum() / (values.size - 1))
