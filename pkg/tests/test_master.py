import numpy as np
import pytest

from cgbp.apps import cutting_stock as cs
from cgbp.apps import net_path as npth
from cgbp.lp_core import GE, LE
from cgbp.master import (add_columns, default_big_m, init_rmp, make_column, recover_original_solution,
                         select_fractional, solve_lrmp)
from cgbp.model import Block, CompactModel, Row, Variable


def _cs1_full(m):
    return [make_column(m, 0, v) for v in ([1, 3, 0], [1, 1, 1], [1, 0, 2])]


def test_empty_pool_uses_artificials(cs1):
    _, m = cs1
    rmp = init_rmp(m)
    sol = solve_lrmp(rmp)
    assert len(rmp.artificials) == 2
    assert sol.artificial_active
    assert sol.objective == pytest.approx(default_big_m(m) * (4 + 2))


def test_cs1_singleton_start(cs1):
    inst, m = cs1
    sol = solve_lrmp(init_rmp(m, cs.warm_start(m, inst)))
    assert sol.objective == pytest.approx(6.0)
    assert not sol.artificial_active


def test_cs1_full_patterns(cs1):
    _, m = cs1
    rmp = init_rmp(m, _cs1_full(m))
    sol = solve_lrmp(rmp)
    assert sol.objective == pytest.approx(7 / 3)
    np.testing.assert_allclose(sol.duals.pi, [1 / 3, 1 / 2], atol=1e-9)
    np.testing.assert_allclose(sol.weights, [4 / 3, 0, 1], atol=1e-9)
    rec = recover_original_solution(rmp, sol.weights)
    counts = dict(rec.patterns[0])
    assert counts[(1.0, 3.0, 0.0)] == pytest.approx(4 / 3)
    assert counts[(1.0, 0.0, 2.0)] == pytest.approx(1.0)


def test_pool_reduced_costs_nonnegative(cs1):
    from cgbp.master import column_reduced_cost
    _, m = cs1
    rmp = init_rmp(m, _cs1_full(m))
    sol = solve_lrmp(rmp)
    assert all(column_reduced_cost(rmp, c, sol.duals) >= -1e-6 for c in rmp.columns)


def test_add_columns(cs1):
    inst, m = cs1
    rmp = init_rmp(m, cs.warm_start(m, inst))
    assert add_columns(rmp, [cs.warm_start(m, inst)[0]]) == 0
    assert add_columns(rmp, [make_column(m, 0, [1, 3, 0])]) == 1
    # four size-3 pieces do not fit a width-10 roll
    assert add_columns(rmp, [make_column(m, 0, [1, 4, 0])]) == 0
    assert len(rmp.columns) == 3


def test_single_column_blocks(toy):
    cols = [make_column(toy, 0, [3]), make_column(toy, 1, [2]), make_column(toy, 2, [0])]
    sol = solve_lrmp(init_rmp(toy, cols))
    assert sol.objective == pytest.approx(2 * 3 + 3 * 2)
    np.testing.assert_allclose(sol.weights, 1.0)
    assert sorted(sol.duals.sigma) == [0, 1, 2]


def test_np1_two_paths_per_task_are_feasible(np1):
    inst, m = np1
    sol = solve_lrmp(init_rmp(m, npth.warm_start(m, inst, K=2)))
    assert not sol.artificial_active
    assert sol.objective == pytest.approx(6.0)


def test_all_artificial_recovery_flagged(np1):
    _, m = np1
    rmp = init_rmp(m)
    sol = solve_lrmp(rmp)
    assert recover_original_solution(rmp, sol.weights).artificial_active


def _two_var_model():
    variables = (Variable("p", 0, 0, 1, True), Variable("q", 1, 0, 1, True))
    rows = (Row.make({0: 1, 1: 1}, LE, 2, "link"),)
    return CompactModel(variables, (1.0, 1.0), rows, (Block(0), Block(1)))


@pytest.mark.parametrize("values, expected", [
    ((0.5, 1.0), 0),
    ((0.2, 0.8), 0),
    ((1.0, 0.0), None),
])
def test_select_fractional(values, expected):
    m = _two_var_model()
    cols = []
    weights = []
    for b, v in enumerate(values):
        for point, w in (([1.0], v), ([0.0], 1 - v)):
            cols.append(make_column(m, b, point))
            weights.append(w)
    rmp = init_rmp(m, cols)
    pick = select_fractional(rmp, np.array(weights))
    if expected is None:
        assert pick is None
    else:
        assert pick[1] == expected
        assert pick[2] == pytest.approx(values[expected])
