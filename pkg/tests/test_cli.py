import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from wentzel.cli import main
from wentzel.errors import ConfigError
from wentzel.mms import GeometrySummary
from wentzel.spectral import disk_oracle, read_mesh
from wentzel.sweep import (
    CSV_HEADER,
    RunConfig,
    SweepRow,
    parse_k_range,
    report,
    rows_from_csv,
    rows_to_csv,
    run_sweep,
    weyl_fit,
)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def disk_sweep(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    out, geom = d / "disk.csv", d / "geom.json"
    code = main(["sweep", "--shape", "disk", "--res", "240", "--beta", "1", "--k", "1..8",
                 "--out", str(out), "--geom-out", str(geom)])
    return code, out, geom


# ---------------------------------------------------------------- sweep


def test_sweep_disk_eight_rows_all_dominated(disk_sweep):
    code, out, _ = disk_sweep
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_csv(out)
    assert [int(r["k"]) for r in rows] == list(range(1, 9))
    assert all(r["dom_ok"] == "true" for r in rows)
    lam = np.array([float(r["lambda"]) for r in rows])
    exact = disk_oracle(1.0, 9)[1:]
    assert np.all(np.abs(lam - exact) / exact < 2e-2)


def test_sweep_geometry_file(disk_sweep):
    _, _, geom = disk_sweep
    g = GeometrySummary.from_json(geom.read_text())
    assert g.i_gamma == 2
    assert g.vol_gamma == pytest.approx(2 * math.pi, rel=1e-3)
    assert g.c_tilde == pytest.approx(2 * math.pi / 3, rel=2e-2)


def test_negative_beta_is_a_config_error(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["sweep", "--beta", "-1", "--k", "1..3", "--out", str(out)]) == 2
    assert not out.exists()


def test_bad_k_range_is_a_config_error(tmp_path):
    out = tmp_path / "x.csv"
    assert main(["sweep", "--beta", "1", "--k", "5..2", "--out", str(out)]) == 2
    assert not out.exists()


def test_sweep_is_byte_reproducible(tmp_path):
    args = ["sweep", "--shape", "square", "--res", "80", "--beta", "0.5", "--k", "1..4", "--n-cover", "2"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_json_output(tmp_path):
    out = tmp_path / "s.json"
    assert main(["sweep", "--shape", "disk", "--res", "96", "--beta", "0", "--k", "1..3",
                 "--no-certify", "--format", "json", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["rows"]) == 3 and doc["exit_code"] == 0
    assert all(r["certified"] is None for r in doc["rows"])


def test_dominance_failure_exit_code(monkeypatch):
    import wentzel.sweep as sw

    real = sw.bound_report

    def broken(*a, **kw):
        rep = real(*a, **kw)
        rep.thm_general = rep.thm_general * 0.0
        return rep

    monkeypatch.setattr(sw, "bound_report", broken)
    res = run_sweep(RunConfig(beta=1.0, k_max=2, resolution=64, certify=False))
    assert res.exit_code == 1
    assert not any(r.dom_ok for r in res.rows)


def test_csv_roundtrip_is_exact():
    rows = [SweepRow(k, 1 / 3 * k, math.nan, math.pi * k, 1e300, 2.5e-17 * k, 7.0, math.nan, k % 2 == 0)
            for k in range(1, 6)]
    back = rows_from_csv(rows_to_csv(rows))
    for a, b in zip(rows, back):
        for name in ("k", "lambda_solver", "certified", "weyl", "thm_general", "thm_ricci", "cor", "euclid", "dom_ok"):
            x, y = getattr(a, name), getattr(b, name)
            assert (x == y) or (isinstance(x, float) and math.isnan(x) and math.isnan(y))
    with pytest.raises(ConfigError):
        rows_from_csv("a,b\n1,2\n")


def test_sweep_csv_roundtrip(disk_sweep):
    _, out, _ = disk_sweep
    text = out.read_text()
    assert rows_to_csv(rows_from_csv(text)) == text


def test_parse_k_range():
    assert parse_k_range("7") == (7, 7)
    assert parse_k_range("2..9") == (2, 9)
    for bad in ("0", "a..b", "3..1", ""):
        with pytest.raises(ConfigError):
            parse_k_range(bad)


def test_run_config_validation():
    for bad in (dict(beta=-1), dict(beta=float("nan")), dict(beta=1, k_min=0), dict(beta=1, r0=0.5),
                dict(beta=1, fmt="xml"), dict(beta=1, n_cover="many"), dict(beta=1, n_cover=0),
                dict(beta=1, shape=None), dict(beta=1, kappa=-0.1)):
        with pytest.raises(ConfigError):
            RunConfig(**bad)
    assert RunConfig(beta=1, n_cover="3").n_cover == 3


# ---------------------------------------------------------------- report


def _rows(beta, kmax, res=480):
    return run_sweep(RunConfig(beta=beta, k_max=kmax, resolution=res, certify=False)).rows


def test_report_weyl_ratio_on_disk():
    rows = _rows(1.0, 40)
    fit = weyl_fit(rows)
    assert fit["k_from"] == 21 and fit["k_to"] == 40
    assert 0.9 <= fit["ratio"] <= 1.1
    assert "ratio" in report(rows)


def test_report_beta_zero_has_no_ratio():
    rows = _rows(0.0, 8, res=120)
    fit = weyl_fit(rows)
    assert "ratio" not in fit and "slope" in fit
    assert "absolute" in report(rows)


def test_report_single_row():
    rows = _rows(1.0, 1, res=64)
    assert weyl_fit(rows) == {}
    text = report(rows)
    assert "omitted" in text and text.endswith("\n")
    with pytest.raises(ConfigError):
        report([])


def test_report_subcommand(disk_sweep, tmp_path, capsys):
    _, out, geom = disk_sweep
    summary = tmp_path / "summary.txt"
    assert main(["report", "--table", str(out), "--geom", str(geom), "--out", str(summary)]) == 0
    text = summary.read_text()
    assert "Weyl slope" in text and "dominance: all bounds hold" in text
    assert main(["report", "--table", str(out)]) == 0
    assert "Weyl slope" in capsys.readouterr().out


# ---------------------------------------------------------------- other subcommands


def test_mesh_gen_and_solve(tmp_path):
    mesh = tmp_path / "disk.mesh"
    assert main(["mesh-gen", "--shape", "disk", "--res", "240", "--out", str(mesh)]) == 0
    assert len(read_mesh(mesh).boundary_vertices) == 240
    out = tmp_path / "eig.csv"
    assert main(["solve", "--mesh", str(mesh), "--beta", "0", "--count", "7", "--out", str(out)]) == 0
    rows = read_csv(out)
    lam = np.array([float(r["lambda"]) for r in rows])
    assert [int(r["k"]) for r in rows] == list(range(7))
    assert np.all(np.abs(lam[1:] - disk_oracle(0, 7)[1:]) < 1e-2)


def test_solve_count_too_large(tmp_path):
    assert main(["solve", "--shape", "disk", "--res", "16", "--beta", "1", "--count", "50",
                 "--out", str(tmp_path / "e.csv")]) == 2


def test_missing_mesh_file(tmp_path):
    assert main(["solve", "--mesh", str(tmp_path / "nope.mesh"), "--beta", "1", "--count", "3",
                 "--out", str(tmp_path / "e.csv")]) == 2


def test_decompose_subcommand(tmp_path):
    out = tmp_path / "fam.json"
    assert main(["decompose", "--shape", "disk", "--res", "240", "--K", "4", "--N", "2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["K"] == 4 and len(doc["capacitors"]) == 4 and doc["space_sha256"]
    # a worst-case covering constant is too atomic for this boundary
    assert main(["decompose", "--shape", "disk", "--res", "240", "--K", "4", "--N", "1024",
                 "--out", str(tmp_path / "bad.json")]) == 4


def test_certify_subcommand(tmp_path):
    out = tmp_path / "cert.csv"
    assert main(["certify", "--shape", "disk", "--res", "240", "--beta", "1", "--k", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["k", "certified_bound", "solver_lambda", "ratio", "family_kind"]
    for r in rows:
        assert float(r["certified_bound"]) >= float(r["solver_lambda"]) * (1 - 1e-8)
        assert float(r["ratio"]) == pytest.approx(float(r["certified_bound"]) / float(r["solver_lambda"]))
    assert main(["certify", "--shape", "disk", "--beta", "1", "--k", "0", "--out", str(out)]) == 2


def test_bounds_subcommand(disk_sweep, tmp_path):
    _, _, geom = disk_sweep
    out = tmp_path / "b.csv"
    assert main(["bounds", "--geom", str(geom), "--beta", "1", "--k-max", "10", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 10
    lam = disk_oracle(1.0, 11)[1:]
    for r, l in zip(rows, lam):
        assert float(r["weyl"]) == pytest.approx(0.25 * int(r["k"]) ** 2, rel=1e-3)
        assert float(r["thm_general"]) >= l and float(r["thm_ricci"]) >= l
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["bounds", "--geom", str(bad), "--beta", "1", "--k-max", "3", "--out", str(out)]) == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wentzel.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("mesh-gen", "solve", "decompose", "certify", "bounds", "sweep", "report"):
        assert sub in proc.stdout


def test_thread_cap_environment(tmp_path, monkeypatch):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("WENTZEL_THREADS", "1")
    assert main(["mesh-gen", "--shape", "square", "--res", "16", "--out", str(tmp_path / "m")]) == 0
    import os

    assert os.environ["OMP_NUM_THREADS"] == "1"
