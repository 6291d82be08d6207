import csv
import io
import json
import subprocess
import sys

import pytest

from esg_incentives.cli import main
from esg_incentives.params import dumps_config, preset


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_table1_gp0(capsys):
    code, out, err = run(["solve", "--config", "table1", "--gamma-p", "0"], capsys)
    assert code == 0
    row = next(csv.DictReader(io.StringIO(out)))
    assert float(row["zQ_1_1"]) == pytest.approx(0.47684, abs=1e-5)
    assert "actions=" in err and "f_star=" in err


def test_solve_to_file(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, out, _ = run(["solve", "--config", "table2", "--gamma-p", "40", "--out", str(path)], capsys)
    assert code == 0 and "f_star=" in out
    row = next(csv.DictReader(path.open()))
    for j in range(1, 7):
        assert abs(float(row[f"colsum_{j}"]) - 1) < 0.05


def test_sweep_single_point_matches_solve(tmp_path, capsys):
    run(["solve", "--config", "table3", "--gamma-p", "0.75", "--out", str(tmp_path / "a.csv")], capsys)
    run(["sweep", "--config", "table3", "--grid", "0.75:0.75:1", "--out", str(tmp_path / "b.csv")], capsys)
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_malformed_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2, "c": [1, 2}')
    code, out, err = run(["solve", "--config", str(bad)], capsys)
    assert code == 2 and "parse error" in err and out == ""


def test_invalid_values_exit_2(tmp_path, capsys):
    doc = json.loads(dumps_config(preset("table3")))
    doc["rho"][2] = 1.0
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(["solve", "--config", str(path)], capsys)
    assert code == 2 and "correlation out of open interval" in err
    assert run(["solve", "--config", "nope.json"], capsys)[0] == 2
    assert run(["sweep", "--config", "table1", "--grid", "3:1:1"], capsys)[0] == 2


def test_flip_threshold_cli(capsys):
    code, out, _ = run(["flip-threshold", "--config", "table3", "--row", "3",
                        "--bracket", "0.1,2", "--tol", "1e-4"], capsys)
    assert code == 0
    assert float(out) == pytest.approx(0.629, abs=0.01)
    code, _, err = run(["flip-threshold", "--config", "table1", "--row", "2"], capsys)
    assert code == 3 and "no sign change" in err


def test_constrained_cli(capsys):
    code, out, err = run(["constrained", "--config", "table2"], capsys)
    assert code == 0 and "tilt_verdict=mixed" in err
    assert out.startswith("agent,zS_bar")


def test_convergence_cli(capsys):
    code, out, _ = run(["convergence", "--config", "table2", "--gamma-p-list", "1e3"], capsys)
    assert code == 0 and len(out.strip().splitlines()) == 2
    code, _, err = run(["convergence", "--config", "table2", "--gamma-p-list", "1e3,1e2"], capsys)
    assert code == 2 and "must increase" in err


def test_simulate_cli(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--config", "table1", "--gamma-p", "1", "--paths", "20000", "--seed", "5"]
    assert run(args + ["--out", str(a)], capsys)[0] == 0
    assert run(args + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert run(["simulate", "--config", "table1", "--paths", "0"], capsys)[0] == 2


def test_figure_cli(tmp_path, capsys):
    code, out, _ = run(["sweep", "--figure", "fig5", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "fig5_sweep.csv").exists() and (tmp_path / "fig5_flip.csv").exists()
    assert run(["sweep", "--figure", "fig5"], capsys)[0] == 2


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["flip-threshold", "--config", "table3"])
    assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "esg_incentives", "solve", "--config", "table1"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("gamma_P,")
