"""Dataset ingestion, report emission and configuration parsing.

Dataset CSV schema (one row per population unit, header required, UTF-8):

    area_id, unit_id, y, x_1..x_p [, w_unit, w_area, v_scale, is_sampled]

Rows with is_sampled = 1 (the default when the column is absent) carry the
observed response; rows with is_sampled = 0 are population-frame rows and
must leave y empty.  Optional fields may be empty.  Infinite MSE estimates
serialize as the literal string ``Inf``.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .model import AreaData, SampleDataset, ValidationError
from .mse import MseReport
from .simharness import SimConfig

__all__ = [
    "ingest",
    "emit_dataset",
    "emit_report",
    "read_report_jsonl",
    "emit_intervals",
    "emit_predictions",
    "RunConfig",
    "parse_sim_configs",
    "REPORT_COLUMNS",
]

# fixed, documented column order of MSE report files
REPORT_COLUMNS = (
    "parameter",
    "area_id",
    "method",
    "mse",
    "m1",
    "m2",
    "m1_bar_star",
    "bias_add",
    "flag",
)


def _fmt(value: float | None) -> str:
    if value is None:
        return ""
    if math.isinf(value):
        return "Inf" if value > 0 else "-Inf"
    return repr(float(value))


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValidationError(f"row {row}: column {col!r} has non-numeric value {text!r}") from None


def ingest(path: str) -> SampleDataset:
    """Read and validate a dataset CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = list(reader)
    header = [h.strip() for h in header]
    required = ["area_id", "unit_id", "y"]
    for col in required:
        if col not in header:
            raise ValidationError(f"{path}: missing required column {col!r}")
    p = 0
    while f"x_{p + 1}" in header:
        p += 1
    if p == 0:
        raise ValidationError(f"{path}: no covariate columns x_1..x_p found")
    col_idx = {name: header.index(name) for name in header}
    optional = {c: (c in col_idx) for c in ("w_unit", "w_area", "v_scale", "is_sampled")}

    seen: set[tuple[int, int]] = set()
    per_area: dict[int, dict] = {}
    for k, row in enumerate(rows):
        rownum = k + 2  # header is line 1
        if len(row) != len(header):
            raise ValidationError(f"row {rownum}: expected {len(header)} fields, got {len(row)}")

        def get(col: str) -> str:
            return row[col_idx[col]].strip()

        try:
            aid = int(get("area_id"))
            uid = int(get("unit_id"))
        except ValueError:
            raise ValidationError(f"row {rownum}: area_id/unit_id must be integers") from None
        if (aid, uid) in seen:
            raise ValidationError(f"row {rownum}: duplicate (area_id, unit_id) = ({aid}, {uid})")
        seen.add((aid, uid))
        x = np.array([_parse_float(get(f"x_{j + 1}"), rownum, f"x_{j + 1}") for j in range(p)])
        sampled = True
        if optional["is_sampled"] and get("is_sampled") != "":
            sampled = bool(int(get("is_sampled")))
        ytext = get("y")
        if sampled and ytext == "":
            raise ValidationError(f"row {rownum}: sampled row has empty response y")
        if not sampled and ytext != "":
            raise ValidationError(f"row {rownum}: nonsampled row must leave y empty")
        v = 1.0
        if optional["v_scale"] and get("v_scale") != "":
            v = _parse_float(get("v_scale"), rownum, "v_scale")
            if v <= 0:
                raise ValidationError(f"row {rownum}: v_scale must be positive")
        w_unit = None
        if optional["w_unit"] and get("w_unit") != "":
            w_unit = _parse_float(get("w_unit"), rownum, "w_unit")
            if w_unit <= 0:
                raise ValidationError(f"row {rownum}: w_unit must be positive")
        w_area = None
        if optional["w_area"] and get("w_area") != "":
            w_area = _parse_float(get("w_area"), rownum, "w_area")
            if w_area <= 0:
                raise ValidationError(f"row {rownum}: w_area must be positive")

        rec = per_area.setdefault(
            aid,
            dict(pop_x=[], pop_v=[], mask=[], y=[], xs=[], vs=[], uids=[], wu=[], wa=None),
        )
        rec["pop_x"].append(x)
        rec["pop_v"].append(v)
        rec["mask"].append(sampled)
        if w_area is not None:
            if rec["wa"] is not None and rec["wa"] != w_area:
                raise ValidationError(f"row {rownum}: w_area differs within area {aid}")
            rec["wa"] = w_area
        if sampled:
            rec["y"].append(_parse_float(ytext, rownum, "y"))
            rec["xs"].append(x)
            rec["vs"].append(v)
            rec["uids"].append(uid)
            rec["wu"].append(w_unit)

    areas = []
    for aid in sorted(per_area):
        rec = per_area[aid]
        n = len(rec["y"])
        wu = rec["wu"]
        has_wu = n > 0 and all(w is not None for w in wu)
        if n > 0 and any(w is not None for w in wu) and not has_wu:
            raise ValidationError(f"area {aid}: unit weights must be given for all sampled units")
        areas.append(
            AreaData(
                area_id=aid,
                y=np.array(rec["y"], dtype=float),
                x=np.array(rec["xs"], dtype=float).reshape(n, p),
                v=np.array(rec["vs"], dtype=float),
                unit_ids=np.array(rec["uids"], dtype=int),
                unit_weights=np.array(wu, dtype=float) if has_wu else None,
                area_weight=rec["wa"],
                pop_x=np.array(rec["pop_x"], dtype=float),
                pop_v=np.array(rec["pop_v"], dtype=float),
                sampled_mask=np.array(rec["mask"], dtype=bool),
            )
        )
    return SampleDataset(areas)


def emit_dataset(data: SampleDataset, path: str) -> None:
    """Write a dataset back to CSV (inverse of ingest for valid datasets)."""
    p = data.p
    has_wu = any(a.unit_weights is not None for a in data.areas)
    has_wa = any(a.area_weight is not None for a in data.areas)
    has_v = any(
        (a.v != 1.0).any() or (a.pop_v is not None and (a.pop_v != 1.0).any())
        for a in data.areas
    )
    header = ["area_id", "unit_id", "y"] + [f"x_{j + 1}" for j in range(p)]
    if has_wu:
        header.append("w_unit")
    if has_wa:
        header.append("w_area")
    if has_v:
        header.append("v_scale")
    header.append("is_sampled")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for a in data.areas:
            if a.pop_x is None:
                rows = [(True, k, a.x[k], a.v[k]) for k in range(a.n)]
            else:
                pv = a.pop_v if a.pop_v is not None else np.ones(a.pop_size)
                trace = np.cumsum(a.sampled_mask) - 1
                rows = [
                    (bool(a.sampled_mask[j]), trace[j] if a.sampled_mask[j] else -1, a.pop_x[j], pv[j])
                    for j in range(a.pop_size)
                ]
            next_synth = int(a.unit_ids.max()) + 1 if a.n else 0
            for sampled, k, x, v in rows:
                if sampled:
                    uid = int(a.unit_ids[k])
                    yval = _fmt(float(a.y[k]))
                    wu = "" if a.unit_weights is None else _fmt(float(a.unit_weights[k]))
                else:
                    uid, yval, wu = next_synth, "", ""
                    next_synth += 1
                row = [a.area_id, uid, yval] + [_fmt(float(t)) for t in x]
                if has_wu:
                    row.append(wu)
                if has_wa:
                    row.append("" if a.area_weight is None else _fmt(float(a.area_weight)))
                if has_v:
                    row.append(_fmt(float(v)))
                row.append(int(sampled))
                writer.writerow(row)


def _report_rows(reports: dict[str, dict[int, MseReport]], variants: tuple[str, ...]):
    for pname in reports:
        for aid in sorted(reports[pname]):
            rep = reports[pname][aid]
            for method in variants:
                value = rep.variant(method)
                if value is None:
                    continue
                flag = ""
                if method == "Add" and rep.negative_add:
                    flag = "negative_add"
                if method == "Mult" and rep.infinite_mult:
                    flag = "infinite_mult"
                yield {
                    "parameter": pname,
                    "area_id": aid,
                    "method": method,
                    "mse": value,
                    "m1": rep.m1,
                    "m2": rep.m2,
                    "m1_bar_star": rep.m1_bar_star,
                    "bias_add": rep.bias_add,
                    "flag": flag,
                }


def emit_report(
    reports: dict[str, dict[int, MseReport]],
    path: str,
    fmt: str = "csv",
    variants: tuple[str, ...] = ("noBC", "Add", "Mult", "Comp", "HM", "S"),
) -> None:
    """Write MSE reports, one row per (parameter, area, method)."""
    rows = list(_report_rows(reports, variants))
    if fmt == "csv":
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for row in rows:
                writer.writerow(
                    [
                        row["parameter"],
                        row["area_id"],
                        row["method"],
                        _fmt(row["mse"]),
                        _fmt(row["m1"]),
                        _fmt(row["m2"]),
                        _fmt(row["m1_bar_star"]),
                        _fmt(row["bias_add"]),
                        row["flag"],
                    ]
                )
    elif fmt == "json-lines":
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                obj = dict(row)
                for key in ("mse", "m1", "m2", "m1_bar_star", "bias_add"):
                    if math.isinf(obj[key]):
                        obj[key] = "Inf" if obj[key] > 0 else "-Inf"
                fh.write(json.dumps(obj, sort_keys=True) + "\n")
    else:
        raise ValidationError(f"unknown report format {fmt!r}")


def read_report_jsonl(path: str) -> list[dict]:
    """Read a json-lines report back, mapping the Inf sentinel to floats."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            for key in ("mse", "m1", "m2", "m1_bar_star", "bias_add"):
                if isinstance(obj.get(key), str):
                    obj[key] = math.inf if obj[key] == "Inf" else -math.inf
            out.append(obj)
    return out


def emit_intervals(rows: list[dict], path: str) -> None:
    """Write interval reports: parameter, area_id, kind, level, lower, upper, alpha_prime."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "area_id", "kind", "level", "lower", "upper", "alpha_prime"])
        for r in rows:
            writer.writerow(
                [
                    r["parameter"],
                    r["area_id"],
                    r["kind"],
                    _fmt(r["level"]),
                    _fmt(r["lower"]),
                    _fmt(r["upper"]),
                    _fmt(r.get("alpha_prime")),
                ]
            )


def emit_predictions(rows: list[dict], path: str) -> None:
    """Write predictions: parameter, area_id, theta_hat, mc_se, L."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "area_id", "theta_hat", "mc_se", "L"])
        for r in rows:
            writer.writerow(
                [r["parameter"], r["area_id"], _fmt(r["theta_hat"]), _fmt(r["mc_se"]), r["L"]]
            )


@dataclass
class RunConfig:
    """Parsed CLI invocation for the batch commands."""

    command: str
    input_path: str | None = None
    output_path: str | None = None
    parameters: tuple[str, ...] = ("mean",)
    L: int = 500
    B: int = 200
    pool_size: int = 100
    seed: int = 0
    levels: tuple[float, ...] = (0.90, 0.95, 0.99)
    pipeline: str = "noninformative"
    interaction: bool = False
    include_standard: bool = False
    fmt: str = "csv"


def _split_list(text: str) -> list[str]:
    return [t.strip() for t in text.replace(",", " ").split() if t.strip()]


def parse_sim_configs(path: str) -> list[tuple[str, SimConfig]]:
    """Parse a simulation config file into (scenario label, SimConfig) pairs.

    Flat key-value text with two sections; every r_sigma value becomes one
    scenario."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ValidationError(f"cannot read config file {path}")
    try:
        design = cp.get("design", "kind")
        r_sigmas = [float(v) for v in _split_list(cp.get("design", "r_sigma"))]
    except (configparser.Error, ValueError) as exc:
        raise ValidationError(f"invalid [design] section: {exc}") from None
    get = lambda sec, opt, fallback: cp.get(sec, opt, fallback=fallback)
    configs = []
    for r in r_sigmas:
        cfg = SimConfig(
            design=design,
            r_sigma=r,
            m_replicates=cp.getint("run", "replicates", fallback=500),
            seed=cp.getint("run", "seed", fallback=0),
            n_areas=cp.getint("design", "d", fallback=100),
            area_size=cp.getint("design", "area_size", fallback=200),
            areas_per_stratum=cp.getint("design", "areas_per_stratum", fallback=50),
            sampled_per_stratum=cp.getint("design", "sampled_per_stratum", fallback=30),
            l_draws=cp.getint("run", "l", fallback=200),
            b_boot=cp.getint("run", "b", fallback=100),
            pool_size=cp.getint("run", "pool_size", fallback=100),
            parameters=tuple(_split_list(get("run", "parameters", "mean exp_mean q25 q75 pg gini"))),
            levels=tuple(float(v) for v in _split_list(get("run", "levels", "0.90 0.95 0.99"))),
            include_standard=cp.getboolean("run", "include_standard", fallback=False),
            tstat_variant=get("run", "tstat_variant", "HM"),
            threads=cp.getint("run", "threads", fallback=1),
        )
        configs.append((f"{r:g}", cfg))
    return configs
