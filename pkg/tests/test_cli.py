import json

import pytest

from cgbp.apps import dumps_instance, load_instance
from cgbp.apps.cutting_stock import CuttingStockInstance
from cgbp.apps.net_path import Arc, NetPathInstance, Task
from cgbp.cli import main


def _write(tmp_path, inst, name="inst.json"):
    p = tmp_path / name
    p.write_text(dumps_instance(inst))
    return str(p)


def _report(path):
    rep = json.loads(open(path).read())

    def strip(d):
        if isinstance(d, dict):
            return {k: strip(v) for k, v in d.items() if k != "wall_ms"}
        if isinstance(d, list):
            return [strip(v) for v in d]
        return d

    return strip(rep)


def test_solve_cs1_bp(tmp_path, cs1):
    inst, _ = cs1
    out = tmp_path / "rep.json"
    trace = tmp_path / "hist.csv"
    code = main(["solve", "--instance", _write(tmp_path, inst), "--algorithm", "bp", "--out", str(out),
                 "--trace", str(trace)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["objective"] == 3 and rep["status"] == "optimal"
    assert trace.read_text().splitlines()[0] == "node,ub,lb,wall_ms"


def test_solve_cg_trace(tmp_path, cs1):
    trace = tmp_path / "cg.csv"
    code = main(["solve", "--instance", _write(tmp_path, cs1[0]), "--algorithm", "cg", "--trace", str(trace)])
    assert code == 0
    rows = trace.read_text().splitlines()
    assert rows[0] == "iteration,lrmp_obj,best_rc,lagrangian_lb,columns_added,wall_ms" and len(rows) > 1


def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"type": "cutting_stock", "roll_width": 10,,}')
    out = tmp_path / "rep.json"
    assert main(["solve", "--instance", str(p), "--out", str(out)]) == 1
    assert not out.exists()
    assert "line 1" in capsys.readouterr().err


def test_schema_violation_names_field(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"type": "net_path", "nodes": 3, "arcs": [{"from": 0, "to": 5, "cost": 1,
                                                                      "capacity": 1}], "tasks": []}))
    assert main(["solve", "--instance", str(p)]) == 1
    assert "arcs[0]" in capsys.readouterr().err


def test_invalid_config(tmp_path, cs1):
    assert main(["solve", "--instance", _write(tmp_path, cs1[0]), "--rc-tol", "0"]) == 1


def test_oracle_over_limit(tmp_path):
    inst = CuttingStockInstance(200, ((5, 40), (7, 28), (9, 22), (11, 18)))
    assert main(["solve", "--instance", _write(tmp_path, inst), "--algorithm", "oracle"]) == 3


def test_infeasible_exit(tmp_path):
    inst = NetPathInstance(3, (Arc(0, 1, 1, 1), Arc(1, 2, 1, 1)), (Task(0, 2, 1), Task(0, 2, 1)))
    path = _write(tmp_path, inst)
    for alg in ("bp", "oracle", "cg"):
        assert main(["solve", "--instance", path, "--algorithm", alg]) == 2


def test_capped_cg_exit(tmp_path, cs1):
    out = tmp_path / "rep.json"
    code = main(["solve", "--instance", _write(tmp_path, cs1[0]), "--algorithm", "cg", "--max-iters", "1",
                 "--out", str(out)])
    assert code == 3
    assert json.loads(out.read_text())["termination"] == "IterationCap"


def test_beam_width_flag(tmp_path, np1):
    path = _write(tmp_path, np1[0])
    out = tmp_path / "rep.json"
    assert main(["solve", "--instance", path, "--beam-width", "1", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["objective"] >= 6
    assert main(["solve", "--instance", path, "--beam-width", "unlimited", "--node-strategy", "dfs"]) == 0
    with pytest.raises(SystemExit):
        main(["solve", "--instance", path, "--beam-width", "0"])


def test_gen_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["gen", "--kind", "net_path", "--seed", "9", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_cutting_stock_example(tmp_path):
    p = tmp_path / "cs.json"
    assert main(["gen", "--kind", "cutting_stock", "--items", "5", "--max-size", "20", "--width", "50",
                 "--out", str(p)]) == 0
    inst = load_instance(str(p))
    assert inst.roll_width == 50 and len(inst.items) == 5
    assert all(s <= 20 for s in inst.sizes)


def test_gen_unsatisfiable(capsys):
    assert main(["gen", "--kind", "cutting_stock", "--items", "30", "--max-size", "3", "--width", "10"]) == 1


def test_gen_batch_validates(tmp_path):
    for kind in ("cutting_stock", "net_path"):
        for seed in range(50):
            p = tmp_path / f"{kind}{seed}.json"
            assert main(["gen", "--kind", kind, "--seed", str(seed), "--out", str(p)]) == 0
            load_instance(str(p))


def test_gen_stdout(capsys):
    assert main(["gen", "--kind", "cutting_stock", "--seed", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["type"] == "cutting_stock"


@pytest.mark.parametrize("alg", ["cg", "bp", "oracle"])
def test_report_reproducible(tmp_path, np1, alg):
    path = _write(tmp_path, np1[0])
    reps = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        main(["solve", "--instance", path, "--algorithm", alg, "--seed", "4", "--out", str(out)])
        reps.append(_report(out))
    assert reps[0] == reps[1]


def test_log_env(tmp_path, cs1, monkeypatch, caplog):
    monkeypatch.setenv("COLGEN_LOG", "debug")
    with caplog.at_level("DEBUG"):
        assert main(["solve", "--instance", _write(tmp_path, cs1[0]), "--algorithm", "cg"]) == 0
    assert any("cg it=" in r.getMessage() for r in caplog.records)
