import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import simulate_dataset
from saebp import io as sio
from saebp.cli import main
from saebp.model import ValidationError, fit_ml
from saebp.mse import MseReport


def write_dataset_csv(path, data):
    sio.emit_dataset(data, str(path))
    return str(path)


def datasets_equal(a, b):
    assert [x.area_id for x in a.areas] == [x.area_id for x in b.areas]
    for x, y in zip(a.areas, b.areas):
        assert np.array_equal(x.y, y.y)
        assert np.array_equal(x.x, y.x)
        assert np.array_equal(x.v, y.v)
        assert np.array_equal(x.unit_ids, y.unit_ids)
        assert np.array_equal(x.sampled_mask, y.sampled_mask)
        assert np.array_equal(x.pop_x, y.pop_x)
        if x.unit_weights is None:
            assert y.unit_weights is None
        else:
            assert np.array_equal(x.unit_weights, y.unit_weights)
        assert (x.area_weight is None) == (y.area_weight is None)
        if x.area_weight is not None:
            assert x.area_weight == y.area_weight


class TestIngestEmit:
    def test_round_trip_identity(self, tmp_path):
        data, _ = simulate_dataset(90, D=5, N=20, unit_weights=2.0, area_weights=3.0)
        p = write_dataset_csv(tmp_path / "d.csv", data)
        back = sio.ingest(p)
        datasets_equal(data, back)
        # and a second pass through emit produces identical bytes
        p2 = write_dataset_csv(tmp_path / "d2.csv", back)
        assert open(p).read() == open(p2).read()

    def test_minimal_two_area_file(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(
            "area_id,unit_id,y,x_1\n"
            "1,1,5.0,1\n"
            "1,2,5.5,1\n"
            "2,1,4.5,1\n"
            "2,2,4.0,1\n"
        )
        data = sio.ingest(str(path))
        assert len(data.areas) == 2
        assert data.areas[0].n == 2
        assert np.all(data.areas[0].sampled_mask)

    def test_refit_after_round_trip_is_identical(self, tmp_path):
        data, _ = simulate_dataset(91, D=8, N=25)
        fit1 = fit_ml(data)
        back = sio.ingest(write_dataset_csv(tmp_path / "d.csv", data))
        fit2 = fit_ml(back)
        assert np.allclose(fit1.params.beta, fit2.params.beta, atol=1e-12)
        assert fit1.params.sigma2_u == pytest.approx(fit2.params.sigma2_u, abs=1e-12)
        assert fit1.params.sigma2_e == pytest.approx(fit2.params.sigma2_e, abs=1e-12)

    def test_duplicate_unit_rejected_with_row_number(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "area_id,unit_id,y,x_1\n1,1,5.0,1\n1,1,5.5,1\n2,1,4.5,1\n"
        )
        with pytest.raises(ValidationError, match="row 3"):
            sio.ingest(str(path))

    def test_negative_weight_rejected(self, tmp_path):
        path = tmp_path / "w.csv"
        path.write_text(
            "area_id,unit_id,y,x_1,w_unit\n1,1,5.0,1,-2\n"
        )
        with pytest.raises(ValidationError, match="row 2"):
            sio.ingest(str(path))

    def test_nonsampled_row_with_response_rejected(self, tmp_path):
        path = tmp_path / "ns.csv"
        path.write_text(
            "area_id,unit_id,y,x_1,is_sampled\n1,1,5.0,1,1\n1,2,4.4,1,0\n"
        )
        with pytest.raises(ValidationError, match="row 3"):
            sio.ingest(str(path))

    def test_non_numeric_cell_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("area_id,unit_id,y,x_1\n1,1,abc,1\n")
        with pytest.raises(ValidationError, match="row 2"):
            sio.ingest(str(path))


def fake_reports():
    rep = MseReport(
        area_id=4, m1=1.0, m2=0.25, m1_bar_star=0.0, bias_add=-1.0,
        mse_noBC=1.25, mse_add=2.25, mse_mult=math.inf, mse_comp=2.25,
        mse_hm=2.25, mse_standard=None, negative_add=False, infinite_mult=True,
    )
    return {"pg155": {4: rep}}


class TestEmitReport:
    def test_golden_csv_layout_and_inf_cell(self, tmp_path):
        path = tmp_path / "r.csv"
        sio.emit_report(fake_reports(), str(path), fmt="csv")
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "parameter,area_id,method,mse,m1,m2,m1_bar_star,bias_add,flag"
        mult_row = [l for l in lines if ",Mult," in l][0]
        assert mult_row == "pg155,4,Mult,Inf,1.0,0.25,0.0,-1.0,infinite_mult"

    def test_empty_reports_header_only(self, tmp_path):
        path = tmp_path / "e.csv"
        sio.emit_report({}, str(path), fmt="csv")
        assert path.read_text().strip() == ",".join(sio.REPORT_COLUMNS)

    def test_jsonl_round_trip_with_inf(self, tmp_path):
        path = tmp_path / "r.jsonl"
        sio.emit_report(fake_reports(), str(path), fmt="json-lines")
        rows = sio.read_report_jsonl(str(path))
        mult = [r for r in rows if r["method"] == "Mult"][0]
        assert math.isinf(mult["mse"])
        raw = [json.loads(l) for l in path.read_text().splitlines()]
        assert [r for r in raw if r["method"] == "Mult"][0]["mse"] == "Inf"


def make_cli_dataset(tmp_path, seed=11, D=8, N=30):
    data, _ = simulate_dataset(seed, D=D, N=N)
    path = tmp_path / "data.csv"
    sio.emit_dataset(data, str(path))
    return path


class TestCli:
    def test_fit_predict_mse_ci(self, tmp_path, capsys):
        data_path = make_cli_dataset(tmp_path)
        assert main(["fit", "-i", str(data_path), "-o", str(tmp_path / "fit.json")]) == 0
        fitted = json.loads((tmp_path / "fit.json").read_text())
        assert set(fitted) >= {"beta", "sigma2_u", "sigma2_e", "loglik", "areas"}

        assert main([
            "predict", "-i", str(data_path), "-o", str(tmp_path / "p.csv"),
            "-p", "mean", "-p", "q25", "-L", "200", "--seed", "3",
        ]) == 0
        rows = list(csv.DictReader(open(tmp_path / "p.csv")))
        assert len(rows) == 16  # 8 areas x 2 parameters

        assert main([
            "mse", "-i", str(data_path), "-o", str(tmp_path / "m.csv"),
            "-p", "mean", "-L", "200", "-B", "16", "--seed", "3",
        ]) == 0
        rows = list(csv.DictReader(open(tmp_path / "m.csv")))
        assert {r["method"] for r in rows} == {"noBC", "Add", "Mult", "Comp", "HM"}

        assert main([
            "ci", "-i", str(data_path), "-o", str(tmp_path / "c.csv"),
            "-p", "mean", "-L", "200", "-B", "16", "--seed", "3", "--levels", "0.90",
        ]) == 0
        rows = list(csv.DictReader(open(tmp_path / "c.csv")))
        kinds = {r["kind"] for r in rows}
        assert {"naive", "cal", "norm:HM"} <= kinds

    def test_report_conversion(self, tmp_path):
        src = tmp_path / "r.jsonl"
        sio.emit_report(fake_reports(), str(src), fmt="json-lines")
        assert main(["report", "-i", str(src), "-o", str(tmp_path / "r.csv")]) == 0
        lines = (tmp_path / "r.csv").read_text().strip().splitlines()
        assert lines[0] == ",".join(sio.REPORT_COLUMNS)
        assert any(",Inf," in l for l in lines[1:])

    def test_validation_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("area_id,unit_id,y,x_1\n1,1,abc,1\n")
        assert main(["fit", "-i", str(bad), "-o", str(tmp_path / "f.json")]) == 2

    def test_numerical_exit_code(self, tmp_path):
        # duplicated covariate column makes the design singular
        path = tmp_path / "sing.csv"
        with open(path, "w") as fh:
            fh.write("area_id,unit_id,y,x_1,x_2\n")
            rng = np.random.default_rng(0)
            for i in range(3):
                for j in range(4):
                    fh.write(f"{i},{j},{5 + rng.normal():.6f},1,1\n")
        assert main(["fit", "-i", str(path), "-o", str(tmp_path / "f.json")]) == 3

    def test_seeded_commands_are_byte_identical(self, tmp_path):
        data_path = make_cli_dataset(tmp_path, seed=12)
        for k in (1, 2):
            assert main([
                "mse", "-i", str(data_path), "-o", str(tmp_path / f"m{k}.csv"),
                "-p", "pg", "-L", "200", "-B", "12", "--seed", "9",
            ]) == 0
        assert (tmp_path / "m1.csv").read_bytes() == (tmp_path / "m2.csv").read_bytes()

    def test_simulate_command_with_config(self, tmp_path):
        cfg = tmp_path / "sim.ini"
        cfg.write_text(
            "[design]\nkind = noninformative\nr_sigma = 1\nd = 6\narea_size = 20\n\n"
            "[run]\nreplicates = 2\nl = 200\nb = 8\nseed = 77\n"
            "parameters = mean\nlevels = 0.90\nthreads = 1\n"
        )
        out = tmp_path / "out"
        assert main(["simulate", "-c", str(cfg), "-o", str(out)]) == 0
        assert (out / "rb_table.csv").exists()
        assert (out / "ecp_table.csv").exists()
        assert (out / "tstats.csv").exists()
        svgs = list(out.glob("*.svg"))
        assert svgs, "expected boxplot SVG output"
