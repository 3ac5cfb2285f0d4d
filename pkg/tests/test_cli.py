import csv
import json
import math

import numpy as np
import pytest

from bosonrenyi import cli
from bosonrenyi.cli import COLUMNS, ScanConfig, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_default_grid():
    ts = ScanConfig().time_grid()
    assert ts.size == 64 and ts[0] == pytest.approx(0.1) and ts[-1] == pytest.approx(1e3)
    ts = ScanConfig(tgrid="lin", tmin=0, tmax=2, tpoints=5).time_grid()
    np.testing.assert_allclose(ts, [0, 0.5, 1, 1.5, 2])


def test_scan_rows_and_schema(tmp_path):
    out = tmp_path / "s"
    assert main(["scan", "--state", "CDW", "--sizes", "4,8", "--times", "0,0.5,3",
                 "--gaussian", "--out", str(out)]) == 0
    raw = (tmp_path / "s.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0].decode() == ",".join(COLUMNS)
    rows = read_csv(tmp_path / "s.csv")
    assert len(rows) == 6
    for r in rows:
        assert r["perm_seconds"] == ""  # timings live in the sidecar
        assert r["seed"] == "0" and r["perm_method"] == "bbfg"
        assert float(r["S2"]) >= float(r["lower_bound"])
    zero = [r for r in rows if float(r["tJ"]) == 0]
    assert len(zero) == 2 and all(float(r["S2"]) == 0 for r in zero)
    side = json.loads((tmp_path / "s.json").read_text())
    assert side["status"] == "ok" and side["rows"] == 6
    assert len(side["timings"]) == 6 and "numba" in side["versions"]


def test_optional_columns_blank(tmp_path):
    out = tmp_path / "b"
    assert main(["scan", "--sizes", "4", "--times", "1", "--no-s-tilde", "--no-bounds",
                 "--out", str(out)]) == 0
    (row,) = read_csv(tmp_path / "b.csv")
    assert row["S2_gaussian"] == "" and row["s_tilde"] == "" and row["lower_bound"] == ""


def test_twelve_significant_digits():
    assert cli.fmt(math.pi) == "3.14159265359"
    assert cli.fmt(None) == "" and cli.fmt(float("nan")) == ""
    assert cli.fmt(-0.0) == "0"


def test_reruns_byte_identical(tmp_path):
    args = ["scan", "--state", "MI", "--sizes", "4,6", "--tpoints", "6", "--gaussian"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert main(args + ["--scan-workers", "3", "--out", str(tmp_path / "c")]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("state: CDW\nsizes: [4, 6]\ntgrid: lin\ntmin: 0\ntmax: 1\ntpoints: 3\n")
    assert main(["scan", "--config", str(cfg), "--sizes", "4", "--out", str(tmp_path / "o")]) == 0
    rows = read_csv(tmp_path / "o.csv")
    assert [r["L"] for r in rows] == ["4"] * 3 and rows[0]["state"] == "CDW"
    js = tmp_path / "cfg.json"
    js.write_text(json.dumps({"state": "MI", "sizes": [4], "times": [2.0], "engine": "ryser"}))
    assert main(["scan", "--config", str(js), "--out", str(tmp_path / "j")]) == 0
    assert read_csv(tmp_path / "j.csv")[0]["perm_method"] == "ryser"


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_infeasible_sizes(tmp_path, capsys):
    assert main(["scan", "--state", "MI", "--sizes", "26", "--out", str(tmp_path / "x")]) == 3
    assert error_of(capsys)["error"] == "infeasible_size"
    assert main(["scan", "--state", "CDW", "--sizes", "52", "--out", str(tmp_path / "x")]) == 3
    assert main(["scan", "--sizes", "8", "--engine", "naive", "--out", str(tmp_path / "x")]) == 3
    assert main(["scan", "--state", "MI", "--sizes", "14", "--page", "--out", str(tmp_path / "x")]) == 3


def test_config_errors(tmp_path, capsys):
    assert main(["scan", "--state", "CDW", "--sizes", "5", "--out", str(tmp_path / "x")]) == 2
    assert error_of(capsys)["error"] == "config"
    assert main(["scan", "--tmin", "0", "--out", str(tmp_path / "x")]) == 2
    assert main(["scan", "--times", "1,0.5", "--out", str(tmp_path / "x")]) == 2
    assert main(["scan", "--workers", "2", "--scan-workers", "2", "--out", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("colour: red\n")
    assert main(["scan", "--config", str(bad)]) == 2


def test_bound_violation_aborts(tmp_path, monkeypatch, capsys):
    real = cli.renyi2_at

    def fake(*a, **k):
        p = real(*a, **k)
        p.lower_bound = p.S2 + 1.0
        return p

    monkeypatch.setattr(cli, "renyi2_at", fake)
    assert main(["scan", "--sizes", "4", "--times", "1,2", "--out", str(tmp_path / "v")]) == 4
    assert error_of(capsys)["error"] == "bound_violation"
    assert read_csv(tmp_path / "v.csv") == []
    assert json.loads((tmp_path / "v.json").read_text())["status"] == "bound_violation"


def test_interrupt_flushes_partial_results(tmp_path, monkeypatch, capsys):
    real = cli.compute_row
    calls = []

    def flaky(cfg, L, t):
        calls.append(t)
        if len(calls) == 3:
            raise KeyboardInterrupt
        return real(cfg, L, t)

    monkeypatch.setattr(cli, "compute_row", flaky)
    assert main(["scan", "--sizes", "4", "--times", "1,2,3,4", "--out", str(tmp_path / "p")]) == 130
    assert len(read_csv(tmp_path / "p.csv")) == 2
    side = json.loads((tmp_path / "p.json").read_text())
    assert side["status"] == "interrupted" and side["rows"] == 2


def test_page_in_sidecar(tmp_path):
    assert main(["scan", "--state", "MI", "--sizes", "4", "--times", "1", "--page",
                 "--page-samples", "64", "--seed", "7", "--out", str(tmp_path / "pg")]) == 0
    side = json.loads((tmp_path / "pg.json").read_text())
    page = side["page"]["4"]
    assert page["samples"] == 64 and page["seed"] == 7 and page["dim"] == 35
    assert 0 < page["mean"] < 2 * math.log(4)


def test_size_scaling(tmp_path):
    out = tmp_path / "ss"
    assert main(["size-scaling", "--state", "MI", "--sizes", "2,4,6,8,10,12", "--tgrid", "lin",
                 "--tmin", "20", "--tmax", "60", "--tpoints", "4", "--gaussian",
                 "--out", str(out)]) == 0
    rows = read_csv(tmp_path / "ss.csv")
    assert [int(r["L"]) for r in rows] == [2, 4, 6, 8, 10, 12]
    for r in rows:
        assert float(r["S2_gaussian_density"]) == pytest.approx(math.log(3) / 2)
        assert r["page_density"] == ""
    fits = json.loads((tmp_path / "ss.json").read_text())["fits"]
    assert fits["S2_density"]["sizes_used"] == 5
    assert fits["S2_gaussian_density"]["intercept"] == pytest.approx(math.log(3) / 2, abs=1e-9)


def test_structure_report(tmp_path):
    out = tmp_path / "st"
    assert main(["structure", "--sizes", "64", "--tfrac", "0,0.05,0.1,0.25", "--out", str(out)]) == 0
    reps = json.loads((tmp_path / "st.json").read_text())["reports"]
    assert len(reps) == 4
    assert reps[0]["width"] == 0 and reps[0]["width_over_4tJ"] is None
    widths = [r["width"] for r in reps]
    assert widths == sorted(widths) and widths[-1] == 64
    assert main(["structure", "--state", "CDW", "--sizes", "8", "--out", str(out)]) == 2


def test_bench(tmp_path):
    out = tmp_path / "bench.json"
    assert main(["bench", "--sizes", "8,10", "--methods", "bbfg,bbfg-par,ryser", "--workers", "1,2",
                 "--out", str(out)]) == 0
    rows = json.loads(out.read_text())
    assert {(r["M"], r["method"], r["workers"]) for r in rows} == {
        (m, meth, w) for m in (8, 10) for meth, w in (("bbfg", 1), ("bbfg-par", 1), ("bbfg-par", 2),
                                                       ("ryser", 1))}
    for r in rows:
        assert r["terms_per_second"] > 0
        assert r["rel_spread"] < 1e-9


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "bosonrenyi", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "size-scaling" in res.stdout
