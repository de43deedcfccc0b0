import csv
import io
import json

import pytest

from simplexpa import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_simulate_counts(tmp_path, capsys):
    out = tmp_path / "s.json"
    code, _, err = run(capsys, "simulate", "--k", "1", "--delta", "0", "--n", "1000", "--seed", "7",
                       "--out", str(out))
    assert code == 0 and "invariants ok" in err
    data = json.loads(out.read_text())
    assert data["schema"] == "simplex-pa/1"
    assert sum(c["count"] for c in data["counts"]) == 2003
    assert data["invariants"]["ok"]


def test_simulate_initial_and_csv(capsys):
    code, out, _ = run(capsys, "simulate", "--k", "2", "--n", "0", "--format", "csv")
    assert code == 0
    assert list(csv.reader(io.StringIO(out))) == [["i_0", "i_1", "i_2", "count"], ["3", "2", "1", "4"]]


@pytest.mark.parametrize("argv", [["simulate", "--delta=-1"], ["simulate", "--n", "-3"],
                                  ["recursion", "--k", "1", "--cap", "1"], ["validate", "--suite", "nope"],
                                  ["simulate", "--k", "9"], ["bogus"]])
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_recursion_prints_base_case(tmp_path, capsys):
    code, out, err = run(capsys, "recursion", "--k", "1", "--delta", "0", "--cap", "12")
    assert code == 0
    assert "p(2,1)=0.6" in err and "consistent" in err
    data = json.loads(out)
    assert data["base_case"] == pytest.approx(0.6) and data["consistent"]
    target = tmp_path / "j.csv"
    code, _, _ = run(capsys, "recursion", "--k", "2", "--delta", "1", "--cap", "8", "--format", "csv",
                     "--out", str(target))
    assert code == 0
    assert target.read_text().startswith("i_0,i_1,i_2,probability")
    assert (tmp_path / "j_marginal.csv").read_text().startswith("i,probability")


def test_seed_and_threads(capsys):
    base = ["limit-sample", "--k", "1", "--samples", "3000", "--seed", "5", "--format", "csv"]
    _, a, _ = run(capsys, *base, "--threads", "1")
    _, b, _ = run(capsys, *base, "--threads", "3")
    _, c, _ = run(capsys, *base[:-4], "--seed", "6", "--format", "csv")
    assert a == b and a != c
    assert a.splitlines()[0] == "z,d_0,d_1"


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"k": 2, "n": 7, "format": "csv"}))
    _, out, err = run(capsys, "simulate", "--config", str(cfg), "--n", "3")
    assert "k=2" in err and "n=3" in err
    assert out.startswith("i_0,i_1,i_2,count")
    cfg.write_text(json.dumps({"colour": 1}))
    assert run(capsys, "simulate", "--config", str(cfg))[0] == 2


def test_pgf_tail_and_bi(capsys):
    code, out, _ = run(capsys, "pgf", "--k", "1", "--samples", "5000")
    assert code == 0 and len(json.loads(out)["points"]) == 9
    code, out, _ = run(capsys, "tail", "--k", "1", "--samples", "300", "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "x_0,x_1,h,empirical,quadrature,se"
    code, out, err = run(capsys, "bi", "--k", "1", "--n", "12", "--replicates", "200")
    data = json.loads(out)
    assert code == 0 and data["value_sum"] == data["value_sum_expected"] == 39
    assert data["coupling"]["replicates"] == 200 and "coupling TV" in err
    assert run(capsys, "bi", "--n", "40", "--replicates", "200")[0] == 2


def test_validate_single_suite(capsys):
    code, out, err = run(capsys, "validate", "--suite", "slln")
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    assert [s["name"] for s in rep["suites"]] == ["slln"]
    assert rep["suites"][0]["measured"]["tv"] < 0.02
    assert "PASS slln" in err
