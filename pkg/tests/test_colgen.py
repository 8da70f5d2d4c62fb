import csv
import math

import numpy as np
import pytest

from cgbp.apps import cutting_stock as cs
from cgbp.apps import net_path as npth
from cgbp.apps.instances import generate_cutting_stock, generate_net_path
from cgbp.colgen import (CONVERGED, ITERATION_CAP, CgConfig, RepairFailed, lagrangian_bound, round_to_integer,
                         run_cg, write_trace)
from cgbp.lp_core import LE
from cgbp.master import init_rmp, make_column
from cgbp.model import Block, CompactModel, Row, Variable, block_submodel, verify_solution
from cgbp.oracle import enumerate_extreme_points, full_column_lp


def test_cs1_converges(cs1):
    inst, m = cs1
    res = run_cg(m, init_rmp(m, cs.warm_start(m, inst)))
    assert res.termination == CONVERGED
    assert res.objective == pytest.approx(7 / 3)
    np.testing.assert_allclose(res.duals.pi, [1 / 3, 1 / 2], atol=1e-9)
    assert res.lagrangian_lb == pytest.approx(7 / 3, abs=1e-6)
    assert res.best_reduced_cost >= -1e-6


def test_complete_warm_start_needs_one_round(cs1):
    _, m = cs1
    cols = enumerate_extreme_points(block_submodel(m, 0))
    res = run_cg(m, init_rmp(m, cols))
    assert res.termination == CONVERGED
    assert res.iterations == 1 and res.columns_generated == 0


def test_iteration_cap(cs1):
    _, m = cs1
    res = run_cg(m, init_rmp(m), config=CgConfig(max_iterations=1))
    assert res.termination == ITERATION_CAP
    assert res.objective > 7 / 3 + 1
    assert res.artificial_active
    with pytest.raises(RepairFailed):
        round_to_integer(m, res)


def test_config_validation():
    with pytest.raises(ValueError):
        CgConfig(rc_tolerance=0)
    with pytest.raises(ValueError):
        CgConfig(max_iterations=0)


def test_trace_is_monotone(cs1, np1):
    for inst, m, ws in ((cs1[0], cs1[1], cs.warm_start), (np1[0], np1[1], npth.warm_start)):
        res = run_cg(m, init_rmp(m, ws(m, inst)))
        objs = [r.lrmp_obj for r in res.trace]
        assert all(b <= a + 1e-7 for a, b in zip(objs, objs[1:]))
        assert res.lagrangian_lb <= res.objective + 1e-6


def test_lagrangian_bound_rules():
    assert lagrangian_bound(5.0, {0: -1.0, 1: 0.0}, {0: None, 1: None}) == 4.0
    assert lagrangian_bound(5.0, {0: -0.5}, {0: 4}) == 3.0
    assert lagrangian_bound(5.0, {0: 0.25}, {0: 4}) == 5.0
    assert lagrangian_bound(5.0, {0: math.inf}, {0: None}) == math.inf
    with pytest.raises(ValueError):
        lagrangian_bound(5.0, {0: -1.0}, {0: None}, exact=False)


def test_cs1_midrun_bound(cs1):
    inst, m = cs1
    res = run_cg(m, init_rmp(m, cs.warm_start(m, inst)), config=CgConfig(heuristic_then_exact=False))
    first = res.trace[0]
    assert first.lagrangian_lb <= 7 / 3 + 1e-9 <= first.lrmp_obj + 1e-9


def test_single_block_bound_from_artificial_start():
    # one block, x in {0..6} with x >= 2 inside the block; the linking row never binds
    variables = (Variable("x", 0, 0, 6, True),)
    rows = (Row.make({0: 1}, LE, 10, "loose"), Row.make({0: -1}, LE, -2, "own", block=0))
    m = CompactModel(variables, (3.0,), rows, (Block(0),))
    res = run_cg(m, init_rmp(m), config=CgConfig(max_iterations=1, heuristic_then_exact=False))
    assert res.trace[0].lagrangian_lb == pytest.approx(6.0)


def test_round_integral_result_unchanged(toy):
    cols = [make_column(toy, 0, [3]), make_column(toy, 1, [2]), make_column(toy, 2, [0])]
    res = run_cg(toy, init_rmp(toy, cols))
    sol = round_to_integer(toy, res)
    assert verify_solution(toy, sol) == []
    assert sol.objective == pytest.approx(res.objective)


def test_round_cs1(cs1):
    inst, m = cs1
    res = run_cg(m, init_rmp(m, cs.warm_start(m, inst)))
    sol = round_to_integer(m, res)
    assert sol.objective == 3
    assert verify_solution(m, sol) == []


@pytest.mark.parametrize("seed", range(8))
def test_rounding_is_verified_or_refused(seed):
    for inst, build, ws in ((generate_cutting_stock(seed), cs.build_cutting_stock, cs.warm_start),
                            (generate_net_path(seed), npth.build_net_path, npth.warm_start)):
        m = build(inst)
        res = run_cg(m, init_rmp(m, ws(m, inst)))
        try:
            sol = round_to_integer(m, res)
        except RepairFailed:
            continue
        assert verify_solution(m, sol) == []
        assert sol.objective >= res.lagrangian_lb - 1e-6


def test_cg_matches_full_lp_on_np1(np1):
    inst, m = np1
    res = run_cg(m, init_rmp(m, npth.warm_start(m, inst)))
    assert res.objective == pytest.approx(full_column_lp(m).objective, abs=1e-9)


def test_trace_csv(cs1, tmp_path):
    inst, m = cs1
    res = run_cg(m, init_rmp(m, cs.warm_start(m, inst)))
    path = tmp_path / "trace.csv"
    write_trace(res, path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["iteration", "lrmp_obj", "best_rc", "lagrangian_lb", "columns_added", "wall_ms"]
    assert len(rows) == res.iterations + 1


def test_threaded_pricing_is_deterministic(np1):
    inst, m = np1
    a = run_cg(m, init_rmp(m, npth.warm_start(m, inst, K=1)))
    b = run_cg(m, init_rmp(m, npth.warm_start(m, inst, K=1)), config=CgConfig(workers=2))
    assert a.objective == b.objective
    assert [c.fingerprint for c in a.rmp.columns] == [c.fingerprint for c in b.rmp.columns]
