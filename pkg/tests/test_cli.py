import csv
import io
import json
import subprocess
import sys
from fractions import Fraction as F

import pytest

from dmixrep.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_decompose_json(capsys):
    code, out, _ = run(["decompose", "--a", "0", "--b", "0.75"], capsys)
    assert code == 0
    obj = json.loads(out)
    assert [c["weight_rational"] for c in obj["components"]] == ["2/3", "1/3"]
    assert obj["residual_rational"] == "0"


def test_decompose_single_component_csv(capsys):
    code, out, _ = run(["decompose", "--a", "0", "--b", "0.5", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 1 and rows[0]["weight_rational"] == "1"


def test_decompose_non_dyadic_with_eps(capsys):
    code, out, _ = run(["decompose", "--a", "0.333333333333", "--b", "0.666666666667", "--eps", "1e-9"], capsys)
    assert code == 0
    assert F(json.loads(out)["residual_rational"]) <= F(1, 10**9)


@pytest.mark.parametrize(
    "argv",
    [
        ["decompose", "--a", "1", "--b", "0.5"],
        ["decompose", "--a", "0.1", "--b", "0.2"],
        ["decompose", "--a", "zero", "--b", "1"],
        ["fisher-curve", "--theta-min", "2", "--theta-max", "1"],
        ["rb-compare", "--theta", "-1"],
        ["em-sim", "--experiment", "nope"],
        ["fit", "--input", "/nonexistent/file"],
        ["frobnicate"],
    ],
)
def test_invalid_input_exit_code(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_fisher_curve_csv(capsys, tmp_path):
    out_path = tmp_path / "fig1.csv"
    code, out, _ = run(["fisher-curve", "--points", "7", "--theta-max", "10", "--out", str(out_path)], capsys)
    assert code == 0 and out == ""
    rows = list(csv.DictReader(out_path.open()))
    assert len(rows) == 7 and list(rows[0]) == ["theta", "r", "lower", "upper"]
    assert all(float(r["lower"]) < float(r["r"]) < 0.5 for r in rows)


def test_fisher_curve_violation_exit_code(capsys, monkeypatch):
    from dmixrep import cli

    monkeypatch.setattr(cli.fisher, "check_curve", lambda rows, agreement=None: ["r not increasing"])
    code, out, err = run(["fisher-curve", "--points", "3"], capsys)
    assert code == 3 and "r not increasing" in err
    assert out.startswith("theta,r,lower,upper")


def test_mse_curve(capsys):
    code, out, _ = run(["mse-curve", "--resolution", "4"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 15
    assert all(float(r["phi"]) <= float(r["var_unconditioned"]) for r in rows)
    code, out, _ = run(["mse-curve", "--resolution", "2", "--format", "json"], capsys)
    assert json.loads(out)["rows"][2]["phi"] == "1/8"


def test_em_sim_smoke_and_determinism(capsys):
    argv = ["em-sim", "--experiment", "poisson2", "--n", "100", "--seed", "4", "--replicates", "2"]
    code, out, _ = run(argv, capsys)
    obj = json.loads(out)
    assert code == 0 and len(obj["replicates"]) == 2
    assert all(0 <= r["total_variation"] <= 1 for r in obj["replicates"])
    assert run(argv, capsys)[1] == out
    code, out, _ = run(argv[:-2] + ["--format", "csv", "--experiment", "geometric"], capsys)
    assert code == 0 and out.splitlines()[0] == "replicate,k,p_k,p_true"


def test_em_sim_gate_exit_code(capsys):
    code, out, err = run(["em-sim", "--experiment", "geometric", "--n", "100", "--max-tv", "0.0"], capsys)
    assert code == 3 and "total variation" in err and json.loads(out)["replicates"]


def test_fit_from_file(capsys, tmp_path):
    path = tmp_path / "xs.txt"
    path.write_text("\n".join(["0.5", "1.5", "3.0", "0.2", "7.1"]))
    code, out, _ = run(["fit", "--input", str(path), "--format", "csv"], capsys)
    assert code == 0 and out.startswith("k,p_k\n")


def test_rb_compare(capsys):
    code, out, _ = run(["rb-compare", "--theta", "1", "--n", "20000", "--seed", "1"], capsys)
    res = json.loads(out)["results"]
    assert code == 0 and [r["analytic"] for r in res] == [2.5, 1.0]
    code, out, _ = run(["rb-compare", "--theta", "0.75", "--n", "20000", "--seed", "1", "--format", "csv"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert {(r["family"], r["estimator"]): float(r["analytic"]) for r in rows}[("uniform", "conditioned")] == 0.125


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "dmixrep", "decompose", "--a", "0", "--b", "0.5", "--format", "csv"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and res.stdout.splitlines()[1] == "0,-1,0,1/2,1,1"
