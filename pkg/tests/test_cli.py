import csv
import io
import json
import math

import numpy as np
import pytest

from pshlab.cli import main
from pshlab.report import csv_text, dumps, fmt
from pshlab.special import cusp_profile


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_special_table_csv(capsys):
    code, out, err = run_cli(capsys, "special-fn", "table", "--format", "csv")
    assert code == 0
    assert "\r" not in out
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["eps", "f", "omega"]
    assert len(rows) == 51
    first = rows[1]
    assert float(first[0]) == pytest.approx(1e-10)
    # 17 significant digits round-trip the doubles exactly
    for cell in first:
        assert float(fmt(float(cell))) == float(cell)
    assert "special_fn.table: PASS" in err


def test_cusp_figure(capsys):
    code, out, _ = run_cli(capsys, "figures", "cusp_fig1", "--format", "csv")
    assert code == 0
    rows = np.array([[float(a), float(b)] for a, b in list(csv.reader(io.StringIO(out)))[1:]])
    assert len(rows) == 2001
    assert rows[0, 0] == -0.5 and rows[-1, 0] == 0.5
    assert rows[1000, 1] == 1.0
    # rows on either side of x = 1/e bracket 1 + 1/e, the value there
    i = np.searchsorted(rows[:, 0], math.exp(-1))
    assert rows[i - 1, 1] <= 1 + math.exp(-1) <= rows[i, 1]
    assert cusp_profile(math.exp(-1)) == pytest.approx(1 + math.exp(-1), abs=1e-15)


def test_unknown_domain_exit_2(capsys):
    code, _, err = run_cli(capsys, "domain", "verify", "--domain", "torus")
    assert code == 2
    assert "torus" in err


def test_bad_config_exit_2(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"bogus": 1}')
    code, _, err = run_cli(capsys, "run", "--config", str(p))
    assert code == 2 and "bogus" in err


def test_run_uses_config_operation(capsys, tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"operation": "special-fn.table", "special.rows": 5}))
    code, out, _ = run_cli(capsys, "run", "--config", str(p))
    rep = json.loads(out)
    assert code == 0
    assert rep["config"]["operation"] == "special-fn.table"
    assert rep["checks"][0]["measured"]["rows"] == 5


def test_failing_check_exit_1(capsys):
    # the Hoelder cusp at C = 1 has a constant omega ratio, so the build refuses it
    code, _, err = run_cli(capsys, "exhaustion", "build", "--domain", "hoelder")
    assert code == 1
    assert "OmegaRatioViolation" in err


def test_reports_are_byte_identical(tmp_path, capsys):
    for name in ("a", "b"):
        assert run_cli(capsys, "domain", "translation-check", "--domain", "cone",
                       "--out", str(tmp_path / name))[0] == 0
    for f in ("report.json", "series.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert (tmp_path / "a" / "timings.json").exists()
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert "runtime_ms" not in json.dumps(rep)


def test_seed_changes_samples(tmp_path, capsys):
    outs = []
    for seed in ("0", "1"):
        code, out, _ = run_cli(capsys, "domain", "segment-check", "--domain", "ball", "--seed", seed)
        assert code == 0
        outs.append(json.loads(out))
    assert outs[0]["config"]["numeric.seed"] != outs[1]["config"]["numeric.seed"]


def test_error_vs_nu(capsys):
    code, out, _ = run_cli(capsys, "figures", "error_vs_nu", "--domain", "ball", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))[1:]
    bounds = [float(r[2]) for r in rows]
    assert code == 0
    assert all(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:]))


def test_trace_point(capsys):
    code, out, _ = run_cli(capsys, "exhaustion", "trace", "--point", "0,0.5", "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["eps", "w_eps", "branch"]
    eps = [float(r[0]) for r in rows[1:]]
    assert eps == sorted(eps, reverse=True)
    # with the default constants the fallback wins and the maximum sits on the grid floor
    assert code == 1
    assert {r[2] for r in rows[1:]} == {"-1"}


def test_eval_points_file(capsys, tmp_path):
    p = tmp_path / "pts.csv"
    p.write_text("x1,y1\n0,0.5\n0.1,0.3\n3,3\n")
    code, out, _ = run_cli(capsys, "exhaustion", "eval", "--points", str(p), "--format", "csv")
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x1", "y1", "delta", "w"]
    assert code == 0
    w = [float(r[3]) for r in rows[1:]]
    assert w[0] < 0 and w[1] < 0 and w[2] == 0.0


def test_report_helpers():
    assert dumps({"b": 1, "a": float("nan")}) == '{\n  "a": "nan",\n  "b": 1\n}\n'
    assert csv_text(["x"], [[0.1]]) == "x\n0.10000000000000001\n"
