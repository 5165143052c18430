import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from capax.cli import main, parse_int_list, split_labels
from capax.errors import ParseError
from capax.fileio import dump_chain
from capax.generators import random_chain
from capax.recurrence import LatticeEnvironment, gen_cycle_env, lattice_truncation

DATA = Path(__file__).resolve().parents[1] / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_split_labels():
    assert split_labels("a, b,(1,2),(-3, 4)") == ["a", "b", "(1,2)", "(-3, 4)"]
    with pytest.raises(ParseError):
        split_labels("(1,2")


def test_parse_int_list():
    assert parse_int_list("1..4") == [1, 2, 3, 4]
    assert parse_int_list("8,16,32") == [8, 16, 32]
    assert parse_int_list("1..2,7") == [1, 2, 7]
    with pytest.raises(ParseError):
        parse_int_list("a..b")


def test_stationary(capsys):
    code, out, _ = run(capsys, "stationary", "--in", DATA / "two_state.json")
    assert code == 0
    doc = json.loads(out)
    assert doc["mu"] == pytest.approx([2 / 3, 1 / 3], rel=1e-15)
    assert doc["normalized"] is True


def test_capacity_two_state(capsys, tmp_path):
    pot = tmp_path / "v.csv"
    code, out, _ = run(capsys, "capacity", "--in", DATA / "two_state.json", "--A", "s0", "--B", "s1",
                       "--potentials", pot)
    assert code == 0
    doc = json.loads(out)
    for key in ("value_prob", "value_minmax", "value_flow"):
        assert doc[key] == pytest.approx(2 / 3, rel=1e-14)
    assert "0.666666666666666" in out
    rows = list(csv.reader(io.StringIO(pot.read_text())))
    assert rows[0] == ["state", "label", "V", "V_star", "F"]
    assert rows[1][1] == "s0" and float(rows[1][2]) == 1.0


def test_capacity_route_subset(capsys):
    code, out, _ = run(capsys, "capacity", "--in", DATA / "random10.json", "--A", "0", "--B", "9",
                       "--routes", "prob,flow")
    doc = json.loads(out)
    assert code == 0 and doc["value_minmax"] is None and doc["value_flow"] is not None


def test_verify_random10(capsys):
    code, out, err = run(capsys, "verify", "--in", DATA / "random10.json", "--A", "0", "--B", "9", "--seed", "7")
    assert code == 0, err
    doc = json.loads(out)
    assert doc["passed"] is True and doc["max_rel_dev"] <= 1e-8


def test_verify_failure_exit(capsys):
    code, out, err = run(capsys, "verify", "--in", DATA / "random10.json", "--A", "0", "--B", "9",
                         "--seed", "7", "--samples", "200", "--tol", "-1")
    assert code == 1
    assert json.loads(err)["error"] == "ToleranceExceeded"
    assert json.loads(out)["passed"] is False


def test_flows(capsys, tmp_path):
    path = tmp_path / "f.csv"
    code, out, _ = run(capsys, "flows", "--in", DATA / "random10.json", "--A", "0,1", "--B", "9", "--csv", path)
    doc = json.loads(out)
    assert code == 0
    assert doc["feasibility"]["max_interior_divergence"] <= 1e-10
    assert path.read_text().splitlines()[0] == "from,to,value"
    code, out, _ = run(capsys, "flows", "--in", DATA / "random10.json", "--A", "0", "--B", "9", "--kind", "current")
    doc = json.loads(out)
    assert doc["feasibility"]["sum_divergence_A"] == pytest.approx(1.0, rel=1e-10)


def test_mc(capsys):
    code, out, _ = run(capsys, "mc", "--in", DATA / "random10.json", "--A", "0", "--B", "9",
                       "--samples", "5000", "--seed", "3")
    doc = json.loads(out)
    assert code == 0 and doc["escape"][0]["samples_used"] == 5000
    code, out, _ = run(capsys, "mc", "--in", DATA / "random10.json", "--A", "0", "--B", "9",
                       "--samples", "2000", "--what", "current")
    assert code == 0 and json.loads(out)["samples_used"] == 2000


def test_green(capsys):
    code, out, _ = run(capsys, "green", "--in", DATA / "random10.json", "--B", "9", "--x", "0")
    doc = json.loads(out)
    assert code == 0 and len(doc["G"]["0"]) == 9 and doc["G"]["0"][0] >= 1.0


def test_lattice_labels(capsys, tmp_path):
    ch = lattice_truncation(LatticeEnvironment.from_plaquettes(4), 3)
    path = tmp_path / "box.json"
    path.write_text(dump_chain(ch))
    code, out, err = run(capsys, "capacity", "--in", path, "--A", "(0,0)", "--B", "@d")
    assert code == 0, err
    assert json.loads(out)["value_prob"] > 0
    code, out, _ = run(capsys, "capacity", "--in", path, "--A", "(0,0),(1,0)", "--B", "@d", "--B", "(2, 2)")
    assert code == 0 and len(json.loads(out)["B"]) == 2


def test_recurrence(capsys, tmp_path):
    code, out, _ = run(capsys, "recurrence", "--lambda", "0.2", "--m", "8,16,32", "--seeds", "1..10")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0].keys()) == ["seed", "m", "cap_exact", "lemma48_bound", "boundary_bound", "runtime_ms"]
    assert len(rows) == 30
    for s in range(1, 11):
        caps = [float(r["cap_exact"]) for r in rows if int(r["seed"]) == s]
        assert caps[0] > caps[1] > caps[2]


def test_recurrence_config(capsys, tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({"lambda": 0.25, "Y_spec": {"kind": "constant", "delta": 1.0},
                               "seeds": [4], "m_list": [2, 4]}))
    code, out, _ = run(capsys, "recurrence", "--config", cfg)
    assert code == 0 and len(out.strip().splitlines()) == 3


class TestErrors:
    def test_unknown_label(self, capsys):
        code, _, err = run(capsys, "capacity", "--in", DATA / "two_state.json", "--A", "zz", "--B", "s1")
        assert code == 2 and json.loads(err)["error"] == "UnknownLabel"

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "stationary", "--in", tmp_path / "none.json")
        assert code == 2 and "error" in json.loads(err)

    def test_bad_json(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        code, _, err = run(capsys, "stationary", "--in", p)
        assert code == 2 and json.loads(err)["error"] == "ParseError"

    def test_intersecting_sets(self, capsys):
        code, _, err = run(capsys, "capacity", "--in", DATA / "two_state.json", "--A", "s0", "--B", "s0")
        assert code == 2 and json.loads(err)["error"] == "SetsIntersect"

    def test_bad_lambda(self, capsys):
        code, _, err = run(capsys, "recurrence", "--lambda", "0.5", "--m", "4")
        assert code == 2 and json.loads(err)["error"] == "BadLambda"

    def test_step_cap(self, capsys, tmp_path):
        p = tmp_path / "slow.json"
        rates = [[str(i), str(i + 1), 0.01] for i in range(5)] + [[str(i + 1), str(i), 1.0] for i in range(5)]
        p.write_text(json.dumps({"states": [str(i) for i in range(6)], "rates": rates}))
        code, _, err = run(capsys, "mc", "--in", p, "--A", "0", "--B", "5", "--samples", "50", "--max-steps", "36",
                           "--what", "current")
        assert code == 3 and json.loads(err)["error"] == "StepCapExceeded"


def test_deterministic_bytes(tmp_path):
    ch = random_chain(15, 77, 0.4)
    src = tmp_path / "c.json"
    src.write_text(dump_chain(ch))
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}.json"
        assert main(["verify", "--in", str(src), "--A", "0,1", "--B", "14", "--seed", "5",
                     "--samples", "20000", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "capax", "capacity", "--in", str(DATA / "two_state.json"),
                          "--A", "s0", "--B", "s1"], capture_output=True, text=True, check=False)
    assert res.returncode == 0, res.stderr
    assert json.loads(res.stdout)["value_prob"] == pytest.approx(2 / 3)
