"""Monte Carlo evaluation harness for the prediction and MSE machinery.

Two generative designs over the superpopulation y = b0 + b1 x + u + e with
truncated normal components and covariates held fixed across replicates:

* noninformative: D areas in three sample-size strata (n_i cycles through
  5, 10, 15), every area sampled, simple random sampling within areas;
* informative: three strata of areas, 30 areas per stratum selected by
  systematic PPS with sizes decreasing in the area effect, units selected by
  systematic PPS with sizes decreasing in the model residual, weights equal
  to inverse inclusion probabilities.

Each replicate runs the full pipeline and records truths, predictors, MSE
estimates, interval hits and the area-selection ledger; aggregation produces
relative-bias and empirical-coverage tables, standardized-error samples and
per-area coverage boxplots.  Replicates are independent jobs keyed by
derived seeds, so results are bit-reproducible under any worker count.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import (
    AreaData,
    EstimationError,
    PopulationDesign,
    SampleDataset,
    ValidationError,
    draw_covariates,
    simulate_population,
)
from .params import AreaParameter, evaluate_many, parse_parameter
from .pipeline import run_informative, run_noninformative
from .rng import derive

__all__ = [
    "SimConfig",
    "SimResult",
    "run_study",
    "build_replicate_dataset",
    "systematic_pps",
    "informative_sizes",
    "aggregate_rb",
    "aggregate_ecp",
    "write_rb_table",
    "write_ecp_table",
    "write_tstats",
    "write_ecp_boxplots",
    "MSE_METHODS",
    "INTERVAL_METHODS",
]

MSE_METHODS = ("noBC", "Add", "Mult", "Comp", "HM", "S")
INTERVAL_METHODS = ("Cal", "noBC", "Add", "Mult", "Comp", "HM", "S", "Naive")

STRATUM_SIZES = (5, 10, 15)


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario."""

    design: str  # "noninformative" | "informative"
    r_sigma: float
    m_replicates: int
    seed: int
    n_areas: int = 100  # noninformative only; informative uses 3 * areas_per_stratum
    area_size: int = 200
    areas_per_stratum: int = 50
    sampled_per_stratum: int = 30
    l_draws: int = 200
    b_boot: int = 100
    pool_size: int = 100
    parameters: tuple[str, ...] = ("mean", "exp_mean", "q25", "q75", "pg", "gini")
    levels: tuple[float, ...] = (0.90, 0.95, 0.99)
    include_standard: bool = False
    sigma_e: float = 0.3
    beta: tuple[float, float] = (5.0, 0.1)
    tstat_variant: str = "HM"
    threads: int = 1

    def __post_init__(self):
        if self.design not in ("noninformative", "informative"):
            raise ValidationError(f"unknown design {self.design!r}")
        if self.m_replicates < 1:
            raise ValidationError("m_replicates must be >= 1")

    @property
    def sigma_u(self) -> float:
        return self.r_sigma * self.sigma_e

    @property
    def d_areas(self) -> int:
        if self.design == "informative":
            return 3 * self.areas_per_stratum
        return self.n_areas

    @property
    def param_objects(self) -> list[AreaParameter]:
        return [parse_parameter(s) for s in self.parameters]

    def population_design(self) -> PopulationDesign:
        return PopulationDesign(
            n_areas=self.d_areas,
            area_size=self.area_size,
            beta=self.beta,
            sigma_u=self.sigma_u,
            sigma_e=self.sigma_e,
            truncate=2.5,
        )

    def sample_sizes(self) -> np.ndarray:
        """Within-area sample sizes n_i."""
        if self.design == "informative":
            return np.repeat(STRATUM_SIZES, self.areas_per_stratum)
        # strata cycled evenly across areas
        return np.array([STRATUM_SIZES[i % 3] for i in range(self.n_areas)])


def systematic_pps(sizes: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Systematic probability-proportional-to-size selection of k units.

    Cumulate k * size / total on the frame order, take a single uniform start
    and select the units whose cumulative interval contains start + j for
    j = 0..k-1.  Units whose scaled size reaches 1 are certainty units,
    selected outright before the systematic pass on the remainder.
    """
    sizes = np.asarray(sizes, dtype=float)
    if sizes.ndim != 1 or np.any(~np.isfinite(sizes)) or np.any(sizes < 0):
        raise ValidationError("sizes must be finite and nonnegative")
    n_pos = int(np.count_nonzero(sizes > 0))
    if k < 0 or k > n_pos:
        raise ValidationError(f"cannot select {k} units from {n_pos} with positive size")
    idx = np.arange(sizes.size)
    remaining = sizes > 0
    certain: list[int] = []
    k_rem = k
    while k_rem > 0:
        total = sizes[remaining].sum()
        newly = remaining & (k_rem * sizes >= total)
        if not newly.any():
            break
        certain.extend(idx[newly].tolist())
        remaining &= ~newly
        k_rem -= int(newly.sum())
    chosen = list(certain)
    if k_rem > 0:
        rem_idx = idx[remaining]
        p = k_rem * sizes[remaining] / sizes[remaining].sum()
        cum = np.cumsum(p)
        targets = rng.uniform() + np.arange(k_rem)
        pos = np.minimum(np.searchsorted(cum, targets, side="left"), rem_idx.size - 1)
        chosen.extend(rem_idx[pos].tolist())
    return np.array(sorted(chosen), dtype=int)


def informative_sizes(
    values: np.ndarray,
    stage: str,
    sigma: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Size measures of the informative design.

    stage "area": sizes round(1000 exp(-u / (8 sigma_u))) from the area
    effects; stage "unit": sizes exp{[-(r / sigma_e) + delta/5] / 3} from the
    model residuals r = y - x'beta, with fresh delta ~ N(0,1) noise.
    """
    values = np.asarray(values, dtype=float)
    if stage == "area":
        return np.round(1000.0 * np.exp(-values / (8.0 * sigma)))
    if stage == "unit":
        if rng is None:
            raise ValidationError("unit-stage sizes need an rng for the delta noise")
        delta = rng.standard_normal(values.shape)
        return np.exp((-values / sigma + delta / 5.0) / 3.0)
    raise ValidationError(f"unknown stage {stage!r}")


# --- single replicate ---------------------------------------------------------


@dataclass
class _ReplicateRecord:
    a_mask: np.ndarray  # (D,) bool
    truths: dict[str, np.ndarray]
    thetas: dict[str, np.ndarray]
    mse: dict[str, dict[str, np.ndarray]]
    hits: dict[str, dict[tuple[str, float], np.ndarray]]
    tstats: dict[str, np.ndarray]


def _interval_method_key(method: str, level: float) -> tuple[str, float]:
    if method == "Naive":
        return ("naive", level)
    if method == "Cal":
        return ("cal", level)
    return (f"norm:{method}", level)


def _evaluate_truths(pop, param_objs) -> dict[str, np.ndarray]:
    D = pop.n_areas
    out = {p.name: np.empty(D) for p in param_objs}
    for i in range(D):
        vals = evaluate_many(param_objs, pop.y[i][None, :])
        for p in param_objs:
            out[p.name][i] = vals[p.name][0]
    return out


def build_replicate_dataset(config: SimConfig, x_fixed, m: int):
    """Generate one replicate's population, draw its sample, and package the
    dataset; returns (dataset, population, area-selection mask)."""
    design = config.population_design()
    pop = simulate_population(design, x_fixed=x_fixed, rng=derive(config.seed, "sim", m, "pop"))
    samp_rng = derive(config.seed, "sim", m, "sampling")
    n_sizes = config.sample_sizes()
    D = config.d_areas
    beta = np.asarray(config.beta)

    areas = []
    a_mask = np.zeros(D, dtype=bool)
    if config.design == "noninformative":
        a_mask[:] = True
        for i in range(D):
            sel = np.sort(samp_rng.choice(config.area_size, int(n_sizes[i]), replace=False))
            mask = np.zeros(config.area_size, dtype=bool)
            mask[sel] = True
            areas.append(
                AreaData(
                    area_id=i,
                    y=pop.y[i][sel],
                    x=pop.x[i][sel],
                    v=np.ones(sel.size),
                    unit_ids=sel,
                    pop_x=pop.x[i],
                    sampled_mask=mask,
                )
            )
    else:
        nps = config.areas_per_stratum
        z_area = informative_sizes(pop.u, "area", config.sigma_u)
        for h in range(3):
            lo, hi = h * nps, (h + 1) * nps
            zs = z_area[lo:hi]
            sel_areas = lo + systematic_pps(zs, config.sampled_per_stratum, samp_rng)
            pi_area = np.minimum(config.sampled_per_stratum * zs / zs.sum(), 1.0)
            a_mask[sel_areas] = True
            for i in range(lo, hi):
                if not a_mask[i]:
                    areas.append(
                        AreaData(
                            area_id=i,
                            y=np.empty(0),
                            x=np.empty((0, len(beta))),
                            v=np.empty(0),
                            unit_ids=np.empty(0, dtype=int),
                            pop_x=pop.x[i],
                            sampled_mask=np.zeros(config.area_size, dtype=bool),
                        )
                    )
                    continue
                resid = pop.y[i] - pop.x[i] @ beta
                z_unit = informative_sizes(resid, "unit", config.sigma_e, samp_rng)
                n_i = int(n_sizes[i])
                sel = systematic_pps(z_unit, n_i, samp_rng)
                pi_unit = np.minimum(n_i * z_unit / z_unit.sum(), 1.0)
                mask = np.zeros(config.area_size, dtype=bool)
                mask[sel] = True
                areas.append(
                    AreaData(
                        area_id=i,
                        y=pop.y[i][sel],
                        x=pop.x[i][sel],
                        v=np.ones(sel.size),
                        unit_ids=sel,
                        unit_weights=1.0 / pi_unit[sel],
                        area_weight=float(1.0 / pi_area[i - lo]),
                        pop_x=pop.x[i],
                        sampled_mask=mask,
                    )
                )
    return SampleDataset(areas), pop, a_mask


def _run_replicate(config: SimConfig, x_fixed, m: int) -> _ReplicateRecord:
    data, pop, a_mask = build_replicate_dataset(config, x_fixed, m)
    D = config.d_areas
    param_objs = config.param_objects
    pipe_seed = int(derive(config.seed, "sim", m, "pipeline").integers(0, 2**62))
    if config.design == "noninformative":
        result = run_noninformative(
            data,
            param_objs,
            L=config.l_draws,
            B=config.b_boot,
            rng_seed=pipe_seed,
            levels=config.levels,
            include_standard=config.include_standard,
        )
    else:
        result = run_informative(
            data,
            param_objs,
            L=config.l_draws,
            B=config.b_boot,
            pool_size=config.pool_size,
            rng_seed=pipe_seed,
            levels=config.levels,
            include_standard=config.include_standard,
        )

    truths = _evaluate_truths(pop, param_objs)
    thetas = {p.name: np.full(D, np.nan) for p in param_objs}
    mse = {p.name: {t: np.full(D, np.nan) for t in MSE_METHODS} for p in param_objs}
    hits = {
        p.name: {
            _interval_method_key(meth, lev): np.full(D, np.nan)
            for meth in INTERVAL_METHODS
            for lev in config.levels
        }
        for p in param_objs
    }
    tstats = {p.name: np.full(D, np.nan) for p in param_objs}
    for ar in result.areas:
        i = ar.area_id
        for p in param_objs:
            theta_hat = ar.predictions[p.name].theta_hat
            thetas[p.name][i] = theta_hat
            rep = ar.reports[p.name]
            for t in MSE_METHODS:
                val = rep.variant(t)
                if val is not None:
                    mse[p.name][t][i] = val
            truth = truths[p.name][i]
            for meth in INTERVAL_METHODS:
                for lev in config.levels:
                    key = _interval_method_key(meth, lev)
                    civ = ar.intervals[p.name].get(key)
                    if civ is not None:
                        hits[p.name][key][i] = 1.0 if civ.covers(truth) else 0.0
            t_mse = rep.variant(config.tstat_variant)
            if t_mse is not None and math.isfinite(t_mse) and t_mse > 0:
                tstats[p.name][i] = (theta_hat - truth) / math.sqrt(t_mse)
    return _ReplicateRecord(
        a_mask=a_mask, truths=truths, thetas=thetas, mse=mse, hits=hits, tstats=tstats
    )


# --- study driver --------------------------------------------------------------

_WORKER_CTX: dict = {}


def _init_worker(config, x_fixed):
    _WORKER_CTX["config"] = config
    _WORKER_CTX["x_fixed"] = x_fixed


def _replicate_task(m: int):
    try:
        return m, _run_replicate(_WORKER_CTX["config"], _WORKER_CTX["x_fixed"], m)
    except (EstimationError, ValidationError) as exc:
        return m, str(exc)


@dataclass
class SimResult:
    """Raw per-replicate records of one scenario plus aggregation helpers."""

    config: SimConfig
    a_ledger: np.ndarray  # (M, D) bool
    truths: dict[str, np.ndarray]  # (M, D)
    thetas: dict[str, np.ndarray]
    mse: dict[str, dict[str, np.ndarray]]
    hits: dict[str, dict[tuple[str, float], np.ndarray]]
    tstats: dict[str, np.ndarray]
    failed_replicates: list[tuple[int, str]] = field(default_factory=list)

    @property
    def param_names(self) -> list[str]:
        return list(self.truths.keys())

    def rb(self, param: str, method: str, mode: str = "pooled") -> float:
        return aggregate_rb(
            self.truths[param],
            self.thetas[param],
            self.mse[param][method],
            self.a_ledger,
            mode,
        )

    def ecp(self, param: str, method: str, level: float, mode: str = "pooled") -> float:
        key = _interval_method_key(method, level)
        return aggregate_ecp(
            self.truths[param], self.hits[param][key], self.a_ledger, mode
        )

    def ecp_per_area(self, param: str, method: str, level: float, mode: str = "pooled") -> np.ndarray:
        key = _interval_method_key(method, level)
        h = self.hits[param][key]
        w = _mode_weights(self.a_ledger, mode) * ~np.isnan(h)
        num = np.nansum(h * w, axis=0)
        den = w.sum(axis=0)
        with np.errstate(invalid="ignore"):
            return np.where(den > 0, num / den, np.nan)


def _mode_weights(a_ledger: np.ndarray, mode: str) -> np.ndarray:
    if mode == "pooled":
        return np.ones_like(a_ledger, dtype=float)
    if mode == "sampled":
        return a_ledger.astype(float)
    if mode == "nonsampled":
        return 1.0 - a_ledger.astype(float)
    raise ValidationError(f"unknown aggregation mode {mode!r}")


def aggregate_rb(
    truths: np.ndarray,
    predictors: np.ndarray,
    mse_estimates: np.ndarray,
    a_ledger: np.ndarray,
    mode: str = "pooled",
) -> float:
    """Relative bias (percent) of an MSE estimator against the Monte Carlo MSE.

    ``pooled`` averages over all (area, replicate) cells; ``sampled`` /
    ``nonsampled`` first average within each area over the replicates where
    the area was (or was not) selected, then across areas.  An infinite
    estimate propagates to an infinite relative bias.
    """
    w = _mode_weights(a_ledger, mode)
    sq = (predictors - truths) ** 2
    if mode == "pooled":
        denom = float(np.mean(sq))
        est = float(np.mean(mse_estimates))
    else:
        cnt = w.sum(axis=0)
        keep = cnt > 0
        if not keep.any():
            raise ValidationError("no replicates in the requested mode")
        with np.errstate(invalid="ignore"):
            per_area_mse = (sq * w).sum(axis=0)[keep] / cnt[keep]
            per_area_est = (mse_estimates * w).sum(axis=0)[keep] / cnt[keep]
        denom = float(np.mean(per_area_mse))
        est = float(np.mean(per_area_est))
    if denom == 0.0:
        raise ValidationError("Monte Carlo MSE is zero; relative bias undefined")
    return 100.0 * (est - denom) / denom


def aggregate_ecp(
    truths: np.ndarray,
    hits: np.ndarray,
    a_ledger: np.ndarray,
    mode: str = "pooled",
) -> float:
    """Empirical coverage probability; undefined intervals (NaN hits) are
    excluded from both numerator and denominator."""
    w = _mode_weights(a_ledger, mode)
    ok = ~np.isnan(hits)
    denom = float((w * ok).sum())
    if denom == 0.0:
        raise ValidationError("no defined intervals in the requested mode")
    return float(np.nansum(hits * w) / denom)


def run_study(config: SimConfig) -> SimResult:
    """Run the full Monte Carlo study described by ``config``."""
    x_fixed = draw_covariates(config.population_design(), derive(config.seed, "covariates"))
    M, D = config.m_replicates, config.d_areas
    results: list[_ReplicateRecord | None] = [None] * M
    failures: list[tuple[int, str]] = []

    threads = config.threads
    env = os.environ.get("SAEBP_THREADS")
    if env:
        threads = max(1, int(env))
    if threads > 1 and M > 1:
        with ProcessPoolExecutor(
            max_workers=threads, initializer=_init_worker, initargs=(config, x_fixed)
        ) as pool:
            for m, rec in pool.map(_replicate_task, range(M), chunksize=1):
                if isinstance(rec, str):
                    failures.append((m, rec))
                else:
                    results[m] = rec
    else:
        _init_worker(config, x_fixed)
        for m in range(M):
            m, rec = _replicate_task(m)
            if isinstance(rec, str):
                failures.append((m, rec))
            else:
                results[m] = rec
    if failures:
        warnings.warn(f"{len(failures)} of {M} replicates failed and were dropped")
    kept = [r for r in results if r is not None]
    if not kept:
        raise EstimationError("all replicates failed")

    param_names = [p.name for p in config.param_objects]
    a_ledger = np.vstack([r.a_mask for r in kept])
    out = SimResult(
        config=config,
        a_ledger=a_ledger,
        truths={p: np.vstack([r.truths[p] for r in kept]) for p in param_names},
        thetas={p: np.vstack([r.thetas[p] for r in kept]) for p in param_names},
        mse={
            p: {t: np.vstack([r.mse[p][t] for r in kept]) for t in MSE_METHODS}
            for p in param_names
        },
        hits={
            p: {
                key: np.vstack([r.hits[p][key] for r in kept])
                for key in kept[0].hits[p]
            }
            for p in param_names
        },
        tstats={p: np.vstack([r.tstats[p] for r in kept]) for p in param_names},
        failed_replicates=failures,
    )
    return out


# --- table and figure emission --------------------------------------------------


def _cell(value: float) -> str:
    if value != value:  # NaN
        return ""
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return f"{value:.4f}"


def _active_methods(results, param: str, methods) -> list[str]:
    out = []
    for t in methods:
        if t in ("Naive", "Cal") or any(
            not np.all(np.isnan(r.mse[param][t])) for _, r in results
        ):
            out.append(t)
    return out


def write_rb_table(results: list[tuple[str, "SimResult"]], path: str, mode: str = "pooled"):
    """Relative-bias table: one row per (parameter, method), one column per scenario."""
    import csv

    params = results[0][1].param_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "method"] + [label for label, _ in results])
        for pname in params:
            for t in _active_methods(results, pname, MSE_METHODS):
                cells = [_cell(r.rb(pname, t, mode)) for _, r in results]
                writer.writerow([pname, t] + cells)


def write_ecp_table(
    results: list[tuple[str, "SimResult"]], path: str, mode: str = "pooled"
):
    """Coverage table: one row per (parameter, method, level), one column per scenario."""
    import csv

    params = results[0][1].param_names
    levels = results[0][1].config.levels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "method", "level"] + [label for label, _ in results])
        for pname in params:
            for t in _active_methods(results, pname, INTERVAL_METHODS):
                for lev in levels:
                    cells = [_cell(r.ecp(pname, t, lev, mode)) for _, r in results]
                    writer.writerow([pname, t, f"{lev:g}"] + cells)


def write_tstats(results: list[tuple[str, "SimResult"]], path: str):
    """Standardized prediction errors (theta_hat - theta) / sqrt(MSE), long format."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "parameter", "area_id", "replicate", "t"])
        for label, r in results:
            for pname in r.param_names:
                tmat = r.tstats[pname]
                ms, iis = np.nonzero(~np.isnan(tmat))
                for m, i in zip(ms.tolist(), iis.tolist()):
                    writer.writerow([label, pname, i, m, f"{tmat[m, i]:.6f}"])


def write_ecp_boxplots(
    results: list[tuple[str, "SimResult"]],
    out_dir: str,
    mode: str = "pooled",
    level: float = 0.95,
):
    """One SVG per (scenario, parameter): boxplots of per-area coverage by method."""
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "saebp"
    import matplotlib.pyplot as plt

    paths = []
    for label, r in results:
        for pname in r.param_names:
            methods = _active_methods([(label, r)], pname, INTERVAL_METHODS)
            series = []
            for t in methods:
                vals = r.ecp_per_area(pname, t, level, mode)
                series.append(vals[~np.isnan(vals)])
            fig, ax = plt.subplots(figsize=(1.1 * len(methods) + 1.5, 3.2))
            ax.boxplot(series, tick_labels=methods)
            ax.axhline(level, linestyle="--", linewidth=0.8, color="grey")
            ax.set_ylabel(f"per-area coverage at {level:g}")
            ax.set_title(f"{pname} ({mode}, scenario {label})", fontsize=10)
            fig.tight_layout()
            fname = os.path.join(out_dir, f"ecp_box_{mode}_{label}_{pname}_{level:g}.svg")
            fig.savefig(fname, format="svg", metadata={"Date": None})
            plt.close(fig)
            paths.append(fname)
    return paths
