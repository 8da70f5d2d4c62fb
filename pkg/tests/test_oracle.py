import ast
import pathlib

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from cgbp.apps import cutting_stock as cs
from cgbp.apps import net_path as npth
from cgbp.apps.instances import generate_cutting_stock, generate_net_path
from cgbp.apps.net_path import Arc, NetPathInstance, Task
from cgbp.lp_core import EQ, GE, LE
from cgbp.model import Block, CompactModel, Row, Variable, block_submodel, lp_relaxation
from cgbp.oracle import LimitExceeded, brute_force_mip, enumerate_extreme_points, full_column_lp

from conftest import simple_paths


def test_cs1_points(cs1):
    _, m = cs1
    pts = {tuple(c.original_values) for c in enumerate_extreme_points(block_submodel(m, 0))}
    cuts = {p[1:] for p in pts if p[0] == 1}
    # every (a1, a2) with a1 <= 3, a2 <= 2, 3 a1 + 5 a2 <= 10, plus the unused roll
    assert cuts == {(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1), (0, 2)}
    assert pts - {(1.0,) + c for c in cuts} == {(0.0, 0.0, 0.0)}


def test_empty_domain():
    m = CompactModel((Variable("x", 0, 0, 3, True),), (1.0,), (Row.make({0: 1}, GE, 5, "r", block=0),),
                     (Block(0),))
    assert enumerate_extreme_points(block_submodel(m, 0)) == []


def test_np1_points_contain_simple_paths(np1):
    inst, m = np1
    arcs = [(a.tail, a.head) for a in inst.arcs]
    pts = {tuple(np.flatnonzero(c.original_values)) for c in enumerate_extreme_points(block_submodel(m, 0))}
    paths = {tuple(sorted(p)) for p in simple_paths(5, arcs, 0, 3)}
    assert paths <= pts
    # the rest are simple paths plus the 2-4-2 cycle
    assert {tuple(sorted(set(p) - {4, 5})) for p in pts - paths} <= paths


def test_limit():
    inst = CuttingStockInstance = cs.CuttingStockInstance(200, ((5, 40), (7, 28), (9, 22), (11, 18)))
    with pytest.raises(LimitExceeded):
        enumerate_extreme_points(block_submodel(cs.build_cutting_stock(inst), 0), limit=1000)


def test_full_lp_values(cs1, toy, np1):
    assert full_column_lp(cs1[1]).objective == pytest.approx(7 / 3)
    assert full_column_lp(np1[1]).objective == pytest.approx(6)
    single = CompactModel((Variable("a", 0, 2, 2, True), Variable("b", 1, 1, 1, True)), (3.0, 4.0),
                          (Row.make({0: 1, 1: 1}, LE, 5, "link"),), (Block(0), Block(1)))
    assert full_column_lp(single).objective == pytest.approx(10.0)


def test_brute_force_values(cs1, np1):
    assert brute_force_mip(cs1[1]).objective == 3
    assert brute_force_mip(np1[1]).objective == 6


def test_brute_force_infeasible():
    inst = NetPathInstance(3, (Arc(0, 1, 1, 1), Arc(1, 2, 1, 1)), (Task(0, 2, 1), Task(0, 2, 1)))
    assert brute_force_mip(npth.build_net_path(inst)).status == "Infeasible"


def test_node_limit():
    inst = generate_net_path(3, nodes=8, tasks=5, arcs_per_node=3, hop_limit=False)
    with pytest.raises(LimitExceeded):
        brute_force_mip(npth.build_net_path(inst), node_limit=5)


def test_independent_of_master_and_pricing():
    src = pathlib.Path(__file__).parents[1] / "src" / "cgbp" / "oracle.py"
    imported = set()
    for node in ast.walk(ast.parse(src.read_text())):
        if isinstance(node, ast.ImportFrom) and node.level:
            imported.update(f"{node.module}.{a.name}" for a in node.names)
    assert not any(name.startswith(("pricing", "colgen", "branch_price")) for name in imported)
    assert {n for n in imported if n.startswith("master.")} == {"master.Column"}


def _milp(m):
    lp = lp_relaxation(m)
    lo = np.full(lp.n_rows, -np.inf)
    hi = np.full(lp.n_rows, np.inf)
    for i, s in enumerate(lp.senses):
        if s in (GE, EQ):
            lo[i] = lp.rhs[i]
        if s in (LE, EQ):
            hi[i] = lp.rhs[i]
    res = milp(lp.costs, constraints=LinearConstraint(lp.A, lo, hi), integrality=np.ones(lp.n_vars),
               bounds=Bounds(lp.lower, lp.upper))
    return res


@pytest.mark.parametrize("seed", range(12))
def test_brute_force_agrees_with_highs_milp(seed):
    for m in (cs.build_cutting_stock(generate_cutting_stock(seed, max_demand=4)),
              npth.build_net_path(generate_net_path(seed, nodes=6, tasks=3))):
        ref = _milp(m)
        got = brute_force_mip(m)
        assert ref.status == 0 and got.status == "Optimal"
        assert got.objective == pytest.approx(ref.fun, abs=1e-6)


@pytest.mark.parametrize("seed", range(12))
def test_full_lp_agrees_with_highs(seed):
    m = npth.build_net_path(generate_net_path(seed, nodes=6, tasks=3))
    fl = full_column_lp(m)
    A = np.array([c.linking_coeffs for c in fl.columns]).T
    blocks = [b.id for b in m.blocks]
    conv = np.array([[1.0 if c.block_id == b else 0.0 for c in fl.columns] for b in blocks])
    _, senses, rhs = m.linking
    ref = linprog([c.cost for c in fl.columns], A_ub=A, b_ub=rhs, A_eq=conv, b_eq=np.ones(len(blocks)),
                  method="highs")
    assert all(s == LE for s in senses)
    assert fl.objective == pytest.approx(ref.fun, abs=1e-7)
