import csv
import json
import sys

import pytest

from joinmilp import query_from_json
from joinmilp.bench_cli import CSV_FIELDS, EXIT_CODES, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_query(tmp_path, capsys, n=4, kind="chain", seed=0, max_card=40):
    code, out, _ = run(capsys, "generate", "--n", str(n), "--kind", kind,
                       "--seed", str(seed), "--count", "1",
                       "--min-card", "2", "--max-card", str(max_card),
                       "--out", str(tmp_path / "q"))
    assert code == 0
    return out.strip().splitlines()[0]


def test_generate_is_deterministic(tmp_path, capsys):
    p1 = write_query(tmp_path / "a", capsys, seed=7)
    p2 = write_query(tmp_path / "b", capsys, seed=7)
    q1 = query_from_json(open(p1).read())
    q2 = query_from_json(open(p2).read())
    assert q1 == q2
    assert q1.n == 4


def test_formulate_writes_mps_and_registry(tmp_path, capsys):
    qpath = write_query(tmp_path, capsys)
    mps = tmp_path / "model.mps"
    reg = tmp_path / "registry.json"
    code, _, err = run(capsys, "formulate", "--query", qpath,
                       "--out", str(mps), "--registry", str(reg))
    assert code == 0
    assert "variables=" in err and "constraints=" in err
    assert "\nNAME join_order\n" in mps.read_text()
    sidecar = json.loads(reg.read_text())
    assert any(k.startswith("tio:") for k in sidecar)


def test_solve_reports_plan_and_exit_code(tmp_path, capsys):
    qpath = write_query(tmp_path, capsys)
    trace = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "solve", "--query", qpath,
                       "--time-limit", "30", "--trace", str(trace))
    assert code == EXIT_CODES["optimal"]
    doc = json.loads(out)
    assert doc["status"] == "optimal"
    assert len(doc["plan"]["order"]) == 4
    assert doc["true_cost"] >= doc["objective"] - 1e-6
    rows = list(csv.reader(open(trace)))
    assert rows[0] == ["elapsed_s", "incumbent", "lower_bound", "cost_over_lb"]


def test_solve_timed_out_exit_code(tmp_path, capsys):
    qpath = write_query(tmp_path, capsys, n=7, max_card=20)
    code, out, _ = run(capsys, "solve", "--query", qpath,
                       "--time-limit", "0.05")
    doc = json.loads(out)
    assert code == EXIT_CODES[doc["status"]]


def test_solve_with_external_solver(tmp_path, capsys):
    qpath = write_query(tmp_path, capsys, n=3)
    adapter = f"{sys.executable} -m joinmilp.bench_cli solve-mps {{in}} {{out}}"
    code, out, _ = run(capsys, "solve", "--query", qpath,
                       "--external-solver", adapter, "--time-limit", "120")
    doc = json.loads(out)
    assert doc["status"] == "feasible"
    assert code == EXIT_CODES["feasible"]
    assert len(doc["plan"]["order"]) == 3


def test_dp_command(tmp_path, capsys):
    qpath = write_query(tmp_path, capsys)
    code, out, _ = run(capsys, "dp", "--query", qpath, "--cost", "choice")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["order"]) == 4
    assert len(doc["operators"]) == 3


def test_compare_csv_schema(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    code, _, _ = run(capsys, "compare", "--n", "4", "--count", "2",
                     "--seed", "0", "--time-limit", "20",
                     "--out", str(out_csv))
    assert code == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert rows and set(rows[0]) == set(CSV_FIELDS)
    methods = {r["method"] for r in rows}
    assert {"milp", "dp"} <= methods


def test_solve_mps_round_trip(tmp_path, capsys):
    qpath = write_query(tmp_path, capsys, n=3)
    mps = tmp_path / "m.mps"
    code, _, _ = run(capsys, "formulate", "--query", qpath, "--out", str(mps))
    assert code == 0
    out = tmp_path / "sol.txt"
    code, _, _ = run(capsys, "solve-mps", str(mps), str(out),
                     "--time-limit", "60")
    assert code == 0
    lines = [l for l in out.read_text().splitlines()
             if l.strip() and not l.startswith("#")]
    assert all(len(l.split()) == 2 for l in lines)
