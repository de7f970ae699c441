import json

import numpy as np
import pytest

from mhres.cli import main
from mhres.instance import load_instance
from mhres.solution import load_solution, save_solution

DIMS = ["E=2", "branching=2", "op_scenarios=2", "periods=4", "I=1", "B=1", "J1=1", "J2=2", "H1=0", "H2=0"]


def _dims():
    return [a for d in DIMS for a in ("--dim", d)]


@pytest.fixture
def inst_file(tmp_path):
    p = tmp_path / "inst.json"
    assert main(["generate", "--size", "custom", "--seed", "3", *_dims(), "--out", str(p)]) == 0
    return p


def test_generate_is_byte_stable(tmp_path, inst_file):
    q = tmp_path / "again.json"
    main(["generate", "--size", "custom", "--seed", "3", *_dims(), "--out", str(q)])
    assert inst_file.read_bytes() == q.read_bytes()


def test_solve_then_audit_passes(tmp_path, inst_file, capsys):
    sol = tmp_path / "sol.json"
    assert main(["solve", "--instance", str(inst_file), "--variant", "sd", "--out", str(sol)]) == 0
    capsys.readouterr()
    assert main(["audit", "--instance", str(inst_file), "--solution", str(sol)]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "violation frequency" in out


def test_corrupted_start_fails_audit(tmp_path, inst_file, capsys):
    sol = tmp_path / "sol.json"
    main(["solve", "--instance", str(inst_file), "--variant", "nod", "--out", str(sol)])
    inst = load_instance(inst_file)
    s = load_solution(sol, inst)
    d = s.operational[0]["delta"]
    started = int(np.argmax(d[0, 0]))
    d[0, 0, next(t for t in inst.feasible_starts(0, 1) if t != started)] = 1.0
    bad = tmp_path / "bad.json"
    save_solution(s, bad)
    report = tmp_path / "audit.json"
    capsys.readouterr()
    assert main(["audit", "--instance", str(inst_file), "--solution", str(bad), "--out", str(report)]) == 1
    assert "(4d)" in capsys.readouterr().out
    assert any(v["constraint"] == "(4d)" for v in json.loads(report.read_text())["violations"])


@pytest.mark.parametrize("method", [["--method", "sfr3", "--strategy", "relaxed:1,1,1/2"], ["--method", "srh"]])
def test_matheuristics_write_logs(tmp_path, inst_file, method):
    sol, log = tmp_path / "s.json", tmp_path / "log.csv"
    assert main(["solve", "--instance", str(inst_file), *method, "--out", str(sol), "--log", str(log)]) == 0
    assert log.read_text().startswith("kappa,root,nodes,vars,time,objective")
    assert main(["audit", "--instance", str(inst_file), "--solution", str(sol)]) == 0


def test_bound_and_vsd(tmp_path, inst_file):
    b = tmp_path / "b.json"
    assert main(["bound", "--instance", str(inst_file), "--scheme", "smg", "--g", "2", "--out", str(b)]) == 0
    assert json.loads(b.read_text())["scheme"] == "smg"
    sol = tmp_path / "sol.json"
    main(["solve", "--instance", str(inst_file), "--out", str(sol)])
    v = tmp_path / "v.json"
    assert main(["vsd", "--instance", str(inst_file), "--feasible", str(sol), "--out", str(v)]) == 0
    assert json.loads(v.read_text())["VSD"] >= -1e-6


def test_lp_export(tmp_path, inst_file):
    lp = tmp_path / "m.lp"
    assert main(["solve", "--instance", str(inst_file), "--lp", str(lp)]) == 0
    assert "Minimize" in lp.read_text()


@pytest.mark.parametrize("argv", [
    ["solve"],
    ["bound", "--instance", "nowhere.json", "--scheme", "sws"],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_missing_smg_group_count(inst_file):
    assert main(["bound", "--instance", str(inst_file), "--scheme", "smg"]) == 2


def test_unknown_backend_exits_3(inst_file, monkeypatch):
    monkeypatch.setenv("MHRES_SOLVER", "nope")
    assert main(["solve", "--instance", str(inst_file)]) == 3


def test_repdays(tmp_path):
    rows = np.vstack([np.zeros((5, 4)), np.ones((3, 4))])
    src = tmp_path / "days.csv"
    np.savetxt(src, rows, delimiter=",")
    out = tmp_path / "rep.json"
    assert main(["repdays", "--input", str(src), "--k", "2", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert sorted(doc["probabilities"]) == ["3/8", "5/8"]


CONFIG = {
    "instance": {"generate": {"size": "custom", "seed": 2, "E": 2, "branching": 2, "op_scenarios": 2,
                              "periods": 4, "I": 1, "B": 1, "J1": 1, "J2": 1, "H1": 0, "H2": 0}},
    "variants": ["nod", "rn", "sd"],
    "methods": [{"method": "monolithic"}],
    "gap": 1e-9,
}


def test_experiment_three_rows_zero_gap_and_report(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(CONFIG))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["experiment", "--config", str(cfg), "--out", str(a), "--report"]) == 0
    assert main(["experiment", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    lines = (a / "results.csv").read_text().splitlines()
    assert len(lines) == 4
    head = lines[0].split(",")
    assert all(float(r.split(",")[head.index("gap")]) == 0.0 for r in lines[1:])
    assert (a / "costs.png").stat().st_size > 0 and (a / "gaps.png").stat().st_size > 0


def test_experiment_set_override_and_report_command(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps(CONFIG))
    run = tmp_path / "run"
    assert main(["experiment", "--config", str(cfg), "--out", str(run), "--set", 'variants=["nod"]',
                 "--set", 'methods=[{"method":"monolithic"},{"method":"sfr3","strategy":"weak-myopic"}]']) == 0
    rows = (run / "results.csv").read_text().splitlines()
    assert len(rows) == 3
    figs = tmp_path / "figs"
    assert main(["report", "--results", str(run), "--out", str(figs)]) == 0
    assert {p.name for p in figs.iterdir()} >= {"summary.csv", "costs.png", "gaps.png"}
