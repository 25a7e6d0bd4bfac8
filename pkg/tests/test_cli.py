from __future__ import annotations

import csv
import json
import math
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from helpers import karate
from sisbounds.cli import EXPERIMENT_COLUMNS, main
from sisbounds.graph import parse_edge_list, write_edge_list

SCHEMA = json.loads(resources.files("sisbounds").joinpath("schemas/bounds.schema.json").read_text())


@pytest.fixture
def cycle2(tmp_path):
    path = tmp_path / "c2.txt"
    path.write_text("0 1\n1 0\n")
    return str(path)


@pytest.fixture
def karate_file(tmp_path):
    path = tmp_path / "karate.txt"
    path.write_bytes(write_edge_list(karate()))
    return str(path)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds_two_cycle(cycle2, capsys):
    code, out, _ = run(["bounds", "--graph", cycle2, "--beta", "1", "--delta", "1"], capsys)
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert doc["rho1"] == pytest.approx(0.0, abs=1e-12)
    assert doc["rho2"] == pytest.approx(2 - math.sqrt(2), abs=1e-12)
    assert doc["diagnostics"]["beta_mode"] == "beta"


def test_bounds_karate_beta_frac(karate_file, tmp_path, capsys):
    out = tmp_path / "report.json"
    code, _, _ = run(["bounds", "--graph", karate_file, "--bidirect", "--beta-frac", "0.9", "--out", str(out)],
                     capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, SCHEMA)
    assert doc["n"] == 34 and doc["strongly_connected"]
    assert doc["rho1"] == pytest.approx(0.1, abs=1e-8)
    assert doc["rho2"] > doc["rho1"]


def test_bounds_disconnected_warns_in_diagnostics(tmp_path, capsys):
    path = tmp_path / "g.txt"
    path.write_text("0 1\n1 0\nn=3\n")
    code, out, _ = run(["bounds", "--graph", str(path), "--beta", "0.5"], capsys)
    doc = json.loads(out)
    assert code == 0 and not doc["strongly_connected"]
    assert any("strongly connected" in w for w in doc["diagnostics"]["warnings"])


def test_rate_files(tmp_path, capsys):
    g = tmp_path / "g.txt"
    g.write_text("0 1\n1 2\n2 0\n")
    b = tmp_path / "beta.txt"
    b.write_text("# per node\n1.0\n1.5\n0.8\n")
    d = tmp_path / "delta.txt"
    d.write_text("1.0 1.2 0.9\n")
    code, out, _ = run(["bounds", "--graph", str(g), "--beta-file", str(b), "--delta-file", str(d)], capsys)
    assert code == 0 and json.loads(out)["delta_min"] == 0.9
    d.write_text("1.0\n")
    code, _, err = run(["bounds", "--graph", str(g), "--beta-file", str(b), "--delta-file", str(d)], capsys)
    assert code == 2 and "expected 3" in err


@pytest.mark.parametrize(
    "argv,code",
    [
        (["bounds", "--graph", "/nonexistent/file", "--beta", "1"], 2),
        (["bounds", "--beta", "1"], 1),
        (["nosuchcommand"], 1),
        (["bounds", "--graph", "{cycle2}"], 1),
        (["bounds", "--graph", "{cycle2}", "--beta", "1", "--beta-frac", "0.9"], 1),
        (["bounds", "--graph", "{cycle2}", "--beta", "-1"], 1),
        (["exact", "--graph", "{big}", "--beta", "1", "--max-n", "10"], 4),
        (["experiment", "--sizes", "", "--beta-fracs", "0.9"], 1),
        (["gen", "--family", "nws", "--n", "4", "--k", "2"], 1),
    ],
)
def test_exit_codes(argv, code, cycle2, tmp_path, capsys):
    big = tmp_path / "big.txt"
    big.write_text("".join(f"{i} {(i + 1) % 12}\n" for i in range(12)))
    argv = [a.format(cycle2=cycle2, big=big) for a in argv]
    got, _, err = run(argv, capsys)
    assert got == code
    assert err


def test_malformed_edge_list_is_input_error(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("0 1\n2\n")
    code, _, err = run(["bounds", "--graph", str(path), "--beta", "1"], capsys)
    assert code == 2 and "line 2" in err


def test_exact_two_cycle(cycle2, capsys):
    code, out, _ = run(["exact", "--graph", cycle2, "--beta", "1"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["transient_states"] == 3
    assert doc["rho"] == pytest.approx(0.585786437626905, abs=1e-12)


def test_gen_ring(tmp_path, capsys):
    out = tmp_path / "ring.txt"
    code, _, _ = run(["gen", "--family", "nws", "--n", "8", "--k", "2", "--p", "0", "--out", str(out)], capsys)
    assert code == 0
    g = parse_edge_list(out.read_bytes())
    assert g.n == 8 and g.num_edges == 32


def test_gen_is_deterministic(capsys):
    argv = ["gen", "--family", "er", "--n", "30", "--p", "0.1", "--seed", "4", "--scc-restrict"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b and a


def test_simulate_byte_identical(cycle2, tmp_path, capsys):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        code, _, err = run(["simulate", "--graph", cycle2, "--beta", "1", "--paths", "1", "--horizon", "1",
                            "--seed", "42", "--out", str(out)], capsys)
        # a single path over one time unit cannot support a decay fit
        assert code == 3 and "decay fit failed" in err
        outs.append(out.read_bytes())
        assert (tmp_path / f"run{k}.decay.json").exists()
    assert outs[0] == outs[1]
    assert outs[0].splitlines()[0] == b"t,m,stderr_m,p_0,p_1"


def test_simulate_stdout_and_fit(cycle2, capsys):
    code, out, err = run(["simulate", "--graph", cycle2, "--beta", "1", "--paths", "2000", "--horizon", "10",
                          "--seed", "1", "--fit-window", "1,6"], capsys)
    assert code == 0
    rows = list(csv.reader(out.splitlines()))
    assert len(rows) == 102
    doc = json.loads(err)
    assert doc["window"] == [1.0, 6.0]
    assert abs(doc["rho_hat"] - (2 - math.sqrt(2))) < 0.1


def test_simulate_initial_file(cycle2, tmp_path, capsys):
    init = tmp_path / "init.txt"
    init.write_text("1\n")
    run(["simulate", "--graph", cycle2, "--beta", "1", "--paths", "10", "--horizon", "1",
         "--init", str(init), "--out", str(tmp_path / "s.csv")], capsys)
    first = (tmp_path / "s.csv").read_text().splitlines()[1].split(",")
    assert first[3:] == ["0.0", "1.0"]


def test_config_precedence(cycle2, tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text(f"graph = {cycle2}\nbeta = 2\ndelta = 1\n")
    _, out, _ = run(["bounds", "--config", str(conf)], capsys)
    assert json.loads(out)["rho1"] == pytest.approx(-1.0)
    # an explicit flag beats the file, including a different beta mode
    _, out, _ = run(["bounds", "--config", str(conf), "--beta", "1"], capsys)
    assert json.loads(out)["rho1"] == pytest.approx(0.0, abs=1e-12)
    _, out, _ = run(["bounds", "--config", str(conf), "--beta-frac", "0.5"], capsys)
    assert json.loads(out)["rho1"] == pytest.approx(0.5)
    conf.write_text("bogus = 1\n")
    code, _, _ = run(["bounds", "--config", str(conf)], capsys)
    assert code == 1


def test_experiment_rows(tmp_path, capsys):
    out = tmp_path / "exp.csv"
    code, _, _ = run(["experiment", "--families", "er", "--sizes", "20", "--beta-fracs", "0.9",
                      "--realizations", "3", "--paths", "300", "--horizon", "40", "--seed", "7",
                      "--out", str(out)], capsys)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == EXPERIMENT_COLUMNS
    assert len(rows) == 3
    for r in rows:
        assert r["status"] == "ok", r["message"]
        rho1, rho2, rho_hat = float(r["rho1"]), float(r["rho2"]), float(r["rho_hat"])
        assert rho2 > rho1
        assert float(r["e1"]) == pytest.approx((rho_hat - rho1) / rho_hat)
        if rho_hat >= rho2:
            assert float(r["e2"]) < float(r["e1"])
    summary = list(csv.DictReader((tmp_path / "exp.summary.csv").open()))
    assert summary[0]["realizations"] == "3"
    script = (tmp_path / "exp.plot.py").read_text()
    assert "exp.summary.csv" in script
    compile(script, "exp.plot.py", "exec")


def test_module_entry_point(cycle2):
    proc = subprocess.run([sys.executable, "-m", "sisbounds", "exact", "--graph", cycle2, "--beta", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["rho"] == pytest.approx(2 - math.sqrt(2))
