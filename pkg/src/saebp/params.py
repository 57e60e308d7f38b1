"""Area-level parameter functionals h(y_1, ..., y_N).

Six built-in functionals (mean, mean of exponentials, quantile, poverty gap,
Gini coefficient, custom callable) plus a registry so configuration files and
the CLI can name them.  Every functional accepts the full length-N vector for
an area; composing observed and simulated values is the caller's job.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "AreaParameter",
    "UndefinedValueError",
    "mean_param",
    "exp_mean_param",
    "quantile_param",
    "poverty_gap_param",
    "gini_param",
    "custom_param",
    "evaluate",
    "evaluate_matrix",
    "evaluate_many",
    "quantile_jw",
    "REGISTRY",
    "parse_parameter",
]


class UndefinedValueError(ValueError):
    """The functional is undefined on the given input (e.g. Gini of all zeros)."""


@dataclass(frozen=True)
class AreaParameter:
    kind: str
    name: str
    p: float | None = None
    z: float | None = None
    fn: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        if self.kind == "quantile":
            if self.p is None or not (0.0 < self.p < 1.0):
                raise ValueError(f"quantile level must be in (0,1), got {self.p}")
        if self.kind == "poverty_gap":
            if self.z is None or self.z <= 0:
                raise ValueError(f"poverty line must be positive, got {self.z}")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom parameter requires a callable")


def mean_param() -> AreaParameter:
    return AreaParameter(kind="mean", name="mean")


def exp_mean_param() -> AreaParameter:
    return AreaParameter(kind="exp_mean", name="exp_mean")


def quantile_param(p: float) -> AreaParameter:
    return AreaParameter(kind="quantile", name=f"q{p:g}", p=float(p))


def poverty_gap_param(z: float = 155.0) -> AreaParameter:
    return AreaParameter(kind="poverty_gap", name=f"pg{z:g}", z=float(z))


def gini_param() -> AreaParameter:
    return AreaParameter(kind="gini", name="gini")


def custom_param(fn: Callable[[np.ndarray], float], name: str = "custom") -> AreaParameter:
    return AreaParameter(kind="custom", name=name, fn=fn)


def quantile_jw(values: np.ndarray, p: float) -> float:
    """Quantile by the interpolation rule Q = (1-w) y_[j] + w y_[j+1],
    j = floor(Np + 1 - p), w = Np + 1 - p - j  (order statistics 1-indexed)."""
    s = np.sort(np.asarray(values, dtype=float))
    return float(_quantile_sorted_rows(s[None, :], p)[0])


def _quantile_sorted_rows(sorted_rows: np.ndarray, p: float) -> np.ndarray:
    n = sorted_rows.shape[1]
    h = n * p + 1.0 - p
    j = int(np.floor(h))
    w = h - j
    if j < 1:
        j, w = 1, 0.0
    elif j >= n:
        j, w = n, 0.0
    lo = sorted_rows[:, j - 1]
    hi = sorted_rows[:, j] if j < n else lo
    return (1.0 - w) * lo + w * hi


def _gini_sorted_rows(sorted_w: np.ndarray) -> np.ndarray:
    # sum_k sum_l |w_k - w_l| = 2 sum_k (2k - N - 1) w_(k); Gini = that / (2 N^2 mean)
    n = sorted_w.shape[1]
    coef = 2.0 * np.arange(1, n + 1) - n - 1.0
    tot = sorted_w.sum(axis=1)
    if np.any(tot <= 0):
        raise UndefinedValueError("Gini undefined: all exp(y) values are zero")
    return (sorted_w @ coef) / (n * tot)


def evaluate_matrix(param: AreaParameter, values: np.ndarray) -> np.ndarray:
    """Evaluate the functional on each row of an (L, N) matrix."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] < 1:
        raise ValueError("functional requires at least one value")
    kind = param.kind
    if kind == "mean":
        return values.mean(axis=1)
    if kind == "exp_mean":
        return np.exp(values).mean(axis=1)
    if kind == "quantile":
        return _quantile_sorted_rows(np.sort(values, axis=1), param.p)
    if kind == "poverty_gap":
        w = np.exp(values)
        return np.where(w < param.z, (param.z - w) / param.z, 0.0).mean(axis=1)
    if kind == "gini":
        return _gini_sorted_rows(np.sort(np.exp(values), axis=1))
    if kind == "custom":
        return np.array([param.fn(row) for row in values], dtype=float)
    raise ValueError(f"unknown parameter kind {kind!r}")


def evaluate(param: AreaParameter, values: np.ndarray) -> float:
    """Evaluate the functional on one length-N vector."""
    return float(evaluate_matrix(param, np.asarray(values, dtype=float)[None, :])[0])


def evaluate_many(param_list: list[AreaParameter], values: np.ndarray) -> dict[str, np.ndarray]:
    """Evaluate several functionals on the rows of one (L, N) matrix, sharing
    the exp/sort passes they have in common."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    kinds = {p.kind for p in param_list}
    exp_v = np.exp(values) if kinds & {"exp_mean", "poverty_gap", "gini"} else None
    sorted_v = np.sort(values, axis=1) if "quantile" in kinds else None
    sorted_exp = np.sort(exp_v, axis=1) if "gini" in kinds else None
    out: dict[str, np.ndarray] = {}
    for p in param_list:
        if p.kind == "mean":
            out[p.name] = values.mean(axis=1)
        elif p.kind == "exp_mean":
            out[p.name] = exp_v.mean(axis=1)
        elif p.kind == "quantile":
            out[p.name] = _quantile_sorted_rows(sorted_v, p.p)
        elif p.kind == "poverty_gap":
            out[p.name] = np.where(exp_v < p.z, (p.z - exp_v) / p.z, 0.0).mean(axis=1)
        elif p.kind == "gini":
            out[p.name] = _gini_sorted_rows(sorted_exp)
        else:
            out[p.name] = evaluate_matrix(p, values)
    return out


REGISTRY: dict[str, Callable[..., AreaParameter]] = {
    "mean": mean_param,
    "exp_mean": exp_mean_param,
    "quantile": quantile_param,
    "poverty_gap": poverty_gap_param,
    "gini": gini_param,
}


def parse_parameter(spec: str) -> AreaParameter:
    """Parse a parameter spec string, e.g. ``mean``, ``quantile:0.25``,
    ``poverty_gap:155``.  Shorthands q25/q75/pg are accepted."""
    spec = spec.strip().lower()
    if spec in ("q25", "q0.25"):
        return quantile_param(0.25)
    if spec in ("q75", "q0.75"):
        return quantile_param(0.75)
    if spec in ("pg", "povertygap"):
        return poverty_gap_param()
    if spec in ("exp", "expmean"):
        return exp_mean_param()
    name, _, arg = spec.partition(":")
    if name not in REGISTRY:
        raise ValueError(f"unknown parameter {spec!r}; known: {sorted(REGISTRY)}")
    if arg:
        return REGISTRY[name](float(arg))
    return REGISTRY[name]()
