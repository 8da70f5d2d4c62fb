"""Branch-and-price: CG at every node of a search tree over original variables.

Ordinary blocks branch on one original variable (``x <= floor(f)`` versus
``x >= ceil(f)``). Aggregated blocks have no per-copy variables, so they
branch on how many columns fall into a box of their variable space
(``SetRow``); a ``<= 0`` child on a one-sided box becomes a plain variable
bound, which is the common case.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .colgen import CgConfig, CgResult, RepairFailed, round_to_integer, run_cg
from .lp_core import GE, LE
from .master import TOL_INT, Column, SetRow, init_rmp, recover_original_solution, select_fractional
from .model import CompactModel, IntegerSolution, validate

log = logging.getLogger(__name__)

OPEN, PRUNED, FATHOMED, BRANCHED, INFEASIBLE = "Open", "Pruned", "Fathomed", "Branched", "InfeasibleNode"
BEST_FIRST, DFS = "best_first", "dfs"


@dataclass
class BpConfig:
    node_strategy: str = BEST_FIRST
    beam_width: int | None = None  # None = unlimited
    cg: CgConfig = field(default_factory=CgConfig)
    time_limit: float | None = None
    node_limit: int | None = None
    tol: float = 1e-6
    round_every_node: bool = True  # the root is always rounded

    def __post_init__(self):
        if self.node_strategy not in (BEST_FIRST, DFS):
            raise ValueError(f"unknown node strategy {self.node_strategy!r}")
        if self.beam_width is not None and self.beam_width < 1:
            raise ValueError("beam_width must be at least 1")


@dataclass
class BpNode:
    id: int
    parent: int | None
    bounds: dict  # global var -> (lo, hi)
    set_rows: tuple = ()
    node_lb: float = -math.inf
    status: str = OPEN
    depth: int = 0
    columns: list = field(default_factory=list, repr=False)
    note: str = ""


@dataclass
class BpState:
    open: list = field(default_factory=list)
    ub: float = math.inf
    incumbent: IntegerSolution | None = None
    lb: float = -math.inf
    explored: int = 0
    history: list = field(default_factory=list)  # (node index, UB, LB, wall_ms)
    exact: bool = True
    columns_generated: int = 0
    cg_iterations: int = 0
    t0: float = field(default_factory=time.perf_counter)

    def offer(self, sol: IntegerSolution, tol: float) -> bool:
        if sol.objective < self.ub - tol:
            self.ub, self.incumbent = sol.objective, sol
            return True
        return False


@dataclass
class BpResult:
    status: str  # Optimal | Infeasible | Feasible | NoSolution
    objective: float
    solution: IntegerSolution | None
    lb: float
    ub: float
    nodes: int
    exact: bool
    history: list
    root_lb: float
    columns_generated: int
    cg_iterations: int
    wall_ms: float
    tree: list = field(default_factory=list, repr=False)
    limited: bool = False  # stopped by the time or node limit


# --------------------------------------------------------------------------
# tree operations


def _tighten(bounds: dict, var: int, lo: float, hi: float) -> dict:
    out = dict(bounds)
    l0, h0 = out.get(var, (-math.inf, math.inf))
    out[var] = (max(l0, lo), min(h0, hi))
    return out


def branch(node: BpNode, var, value: float, ids, model: CompactModel | None = None) -> tuple[BpNode, BpNode]:
    """Split on original variable ``var`` at fractional value ``value``."""
    if isinstance(var, Column) or not isinstance(var, (int, np.integer)) or isinstance(var, bool):
        raise TypeError("branching is defined on original variables only, not master weights")
    if model is not None and not 0 <= var < model.n_vars:
        raise ValueError(f"variable index {var} out of range")
    if abs(value - round(value)) <= TOL_INT:
        raise ValueError(f"value {value} of variable {var} is integral")
    lo, hi = math.floor(value), math.ceil(value)
    kids = (
        BpNode(next(ids), node.id, _tighten(node.bounds, int(var), -math.inf, lo), node.set_rows,
               node.node_lb, OPEN, node.depth + 1, node.columns, f"x{var} <= {lo}"),
        BpNode(next(ids), node.id, _tighten(node.bounds, int(var), hi, math.inf), node.set_rows,
               node.node_lb, OPEN, node.depth + 1, node.columns, f"x{var} >= {hi}"),
    )
    return kids


def branch_set(node: BpNode, model: CompactModel, block_id, box: tuple, value: float, ids) -> tuple[BpNode, BpNode]:
    """Split an aggregated block on the number of its columns inside ``box``.

    ``box`` uses block-local variable indices. A ``<= 0`` side on a box with
    a single lower threshold turns into an upper bound on that variable.
    """
    if abs(value - round(value)) <= TOL_INT:
        raise ValueError(f"column count {value} in box is integral")
    lo, hi = math.floor(value), math.ceil(value)
    gvars = model.block_vars(block_id)
    if lo == 0 and len(box) == 1:
        j, blo, _ = box[0]
        left_bounds = _tighten(node.bounds, int(gvars[j]), -math.inf, blo - 1)
        left = BpNode(next(ids), node.id, left_bounds, node.set_rows, node.node_lb, OPEN, node.depth + 1,
                      node.columns, f"{model.variables[gvars[j]].name} <= {blo - 1:g}")
    else:
        row = SetRow(block_id, box, LE, lo)
        left = BpNode(next(ids), node.id, node.bounds, node.set_rows + (row,), node.node_lb, OPEN,
                      node.depth + 1, node.columns, row.describe())
    row = SetRow(block_id, box, GE, hi)
    right = BpNode(next(ids), node.id, node.bounds, node.set_rows + (row,), node.node_lb, OPEN,
                   node.depth + 1, node.columns, row.describe())
    return left, right


def filter_columns(pool, bounds: dict, model: CompactModel) -> list[Column]:
    """Columns of ``pool`` whose original values respect ``bounds`` (global var -> (lo, hi))."""
    if not bounds:
        return [c for c in pool if not c.is_artificial]
    local = {}
    for blk in model.blocks:
        idx = model.block_vars(blk.id)
        local[blk.id] = [(k, bounds[int(j)]) for k, j in enumerate(idx) if int(j) in bounds]
    out = []
    for c in pool:
        if c.is_artificial:
            continue
        if all(lo - TOL_INT <= c.original_values[k] <= hi + TOL_INT for k, (lo, hi) in local[c.block_id]):
            out.append(c)
    return out


def select_next(open_nodes: list, strategy: str = BEST_FIRST) -> BpNode:
    if not open_nodes:
        raise ValueError("no open nodes")
    if strategy == BEST_FIRST:
        return min(open_nodes, key=lambda n: (n.node_lb, n.id))
    if strategy == DFS:
        return min(open_nodes, key=lambda n: (-n.depth, n.id))
    raise ValueError(f"unknown node strategy {strategy!r}")


def beam_select(nodes: list, beam_width: int | None) -> tuple[list, list]:
    """``(kept, dropped)``: the ``beam_width`` best nodes by ``(node_lb, id)``."""
    if beam_width is None:
        return list(nodes), []
    ranked = sorted(nodes, key=lambda n: (n.node_lb, n.id))
    return ranked[:beam_width], ranked[beam_width:]


# --------------------------------------------------------------------------
# node processing


def _bound_value(lb: float, model: CompactModel, tol: float) -> float:
    if model.integral_objective and np.isfinite(lb):
        return math.ceil(lb - tol)
    return lb


def _dominated(lb: float, state: BpState, model: CompactModel, tol: float) -> bool:
    return _bound_value(lb, model, tol) >= state.ub - tol


def _aggregated_integral(cg: CgResult, block_ids) -> bool:
    return all(abs(w - round(w)) <= TOL_INT for c, w in zip(cg.rmp.columns, cg.weights) if c.block_id in block_ids)


def _lp_solution(model: CompactModel, cg: CgResult) -> IntegerSolution:
    rec = recover_original_solution(cg.rmp, cg.weights)
    x = np.round(rec.x)
    patterns = {}
    for c, w in zip(cg.rmp.columns, cg.weights):
        if model.block(c.block_id).aggregated and round(w) > 0:
            patterns.setdefault(c.block_id, []).append((tuple(float(v) for v in c.original_values), int(round(w))))
    obj = float(model.cost_vector @ x) if model.n_vars else 0.0
    for b, pats in patterns.items():
        sub = cg.rmp.subs[b]
        obj += sum(n * float(sub.costs @ np.asarray(v)) for v, n in pats)
    return IntegerSolution(obj, x, patterns)


def _set_candidates(model: CompactModel, cg: CgResult, block_id):
    """Boxes over an aggregated block and the column weight they hold."""
    sub = cg.rmp.subs[block_id]
    own = [(c.original_values, w) for c, w in zip(cg.rmp.columns, cg.weights)
           if c.block_id == block_id and w > TOL_INT]
    lo, hi = sub.lower, sub.upper
    cands = []
    for j in range(sub.n_vars):
        top = max(v[j] for v, _ in own)
        for k in range(int(math.floor(lo[j])) + 1, int(round(top)) + 1):
            box = ((j, float(k), float(hi[j])),)
            total = sum(w for v, w in own if v[j] >= k - TOL_INT)
            cands.append((box, total))
    for v, w in own:
        cands.append((tuple((j, float(v[j]), float(v[j])) for j in range(sub.n_vars)), w))
    return cands


def _branch_children(node: BpNode, model: CompactModel, cg: CgResult, ids):
    pick = select_fractional(cg.rmp, cg.weights)
    if pick is not None:
        _, var, value = pick
        return branch(node, var, value, ids, model)
    for blk in model.blocks:
        if not blk.aggregated:
            continue
        cands = _set_candidates(model, cg, blk.id)
        frac = [(abs(t - math.floor(t) - 0.5), k, box, t) for k, (box, t) in enumerate(cands)
                if abs(t - round(t)) > TOL_INT]
        if not frac:
            continue
        single = [f for f in frac if len(f[2]) == 1]
        _, _, box, t = min(single or frac, key=lambda f: (f[0], f[1]))
        return branch_set(node, model, blk.id, box, t, ids)
    raise RuntimeError("fractional master solution but no branching candidate")


def process_node(node: BpNode, model: CompactModel, pricers, state: BpState, config: BpConfig, ids):
    """Solve ``node`` by CG and settle it; returns its children (possibly none)."""
    tol = config.tol
    pool = filter_columns(node.columns, node.bounds, model)
    rmp = init_rmp(model, pool, bounds=node.bounds, set_rows=node.set_rows)
    cg = run_cg(model, rmp, pricers, config.cg)
    state.explored += 1
    state.columns_generated += cg.columns_generated
    state.cg_iterations += cg.iterations
    if cg.artificial_active:
        if cg.converged:
            node.status = INFEASIBLE
        else:
            node.status, node.note = PRUNED, node.note + " (cap with artificials)"
            state.exact = False
        return []
    parent_lb = node.node_lb
    if cg.converged:
        node.node_lb = max(parent_lb, cg.objective)
    else:
        node.node_lb = max(parent_lb, cg.lagrangian_lb)
    if config.round_every_node or node.parent is None:
        try:
            state.offer(round_to_integer(model, cg, pricers), tol)
        except RepairFailed as exc:
            log.debug("node %d: rounding failed: %s", node.id, exc)
    if _dominated(node.node_lb, state, model, tol):
        node.status = PRUNED
        return []
    agg = {b.id for b in model.blocks if b.aggregated}
    if select_fractional(rmp, cg.weights) is None and _aggregated_integral(cg, agg):
        state.offer(_lp_solution(model, cg), tol)
        node.status = FATHOMED
        if not cg.converged:
            state.exact = False
        return []
    node.status = BRANCHED
    kids = _branch_children(node, model, cg, ids)
    for k in kids:
        k.columns = list(rmp.columns)
    return list(kids)


# --------------------------------------------------------------------------


def _record(state: BpState, open_nodes):
    live = [n.node_lb for n in open_nodes if n.node_lb < state.ub]
    if live:
        lb = min(min(live), state.ub)
    else:
        lb = state.ub
    state.lb = max(state.lb, lb)
    state.history.append((state.explored, state.ub, state.lb, (time.perf_counter() - state.t0) * 1e3))


def run_bp(model: CompactModel, pricers: dict | None = None, config: BpConfig | None = None,
           initial_columns=()) -> BpResult:
    cfg = config or BpConfig()
    problems = validate(model)
    if problems:
        raise ValueError("; ".join(problems))
    state = BpState()
    if np.all(model.cost_vector >= 0):
        state.lb = 0.0
    ids = itertools.count()
    root = BpNode(next(ids), None, {}, (), -math.inf, OPEN, 0, list(initial_columns))
    tree = [root]
    limited = False

    def out_of_budget():
        if cfg.node_limit is not None and state.explored >= cfg.node_limit:
            return True
        return cfg.time_limit is not None and time.perf_counter() - state.t0 >= cfg.time_limit

    if cfg.beam_width is None:
        state.open = [root]
        while state.open:
            if out_of_budget():
                limited = True
                break
            node = select_next(state.open, cfg.node_strategy)
            state.open.remove(node)
            if node.id != root.id and _dominated(node.node_lb, state, model, cfg.tol):
                node.status = PRUNED
                continue
            kids = process_node(node, model, pricers, state, cfg, ids)
            tree.extend(kids)
            state.open.extend(kids)
            node.columns = []
            _record(state, state.open)
    else:
        level = [root]
        while level:
            if out_of_budget():
                limited = True
                state.open = level
                break
            branched = []
            for node in sorted(level, key=lambda n: (n.node_lb, n.id)):
                if node.id != root.id and _dominated(node.node_lb, state, model, cfg.tol):
                    node.status = PRUNED
                    continue
                kids = process_node(node, model, pricers, state, cfg, ids)
                if kids:
                    branched.append((node, kids))
                node.columns = []
                _record(state, [k for _, ks in branched for k in ks])
            kept, dropped = beam_select([n for n, _ in branched], cfg.beam_width)
            for n in dropped:
                n.note += " (beam)"
                state.exact = False
            level = [k for n in kept for k in _kids_of(n, branched)]
            tree.extend(k for _, ks in branched for k in ks)
            for n in dropped:
                for k in _kids_of(n, branched):
                    k.status = PRUNED
            state.open = level
    if limited:
        state.exact = False
    if state.open and not limited:
        state.open = []
    wall = (time.perf_counter() - state.t0) * 1e3
    if state.incumbent is None:
        status = "Infeasible" if state.exact and not limited else "NoSolution"
        lb = math.inf if status == "Infeasible" else state.lb
        return BpResult(status, math.inf, None, lb, math.inf, state.explored, state.exact, state.history,
                        root.node_lb, state.columns_generated, state.cg_iterations, wall, tree, limited)
    status = "Optimal" if state.exact else "Feasible"
    if state.exact:
        state.lb = max(state.lb, state.ub)
    return BpResult(status, state.ub, state.incumbent, state.lb, state.ub, state.explored, state.exact,
                    state.history, root.node_lb, state.columns_generated, state.cg_iterations, wall, tree, limited)


def _kids_of(node, branched):
    for n, ks in branched:
        if n is node:
            return ks
    return []


def write_history(result: BpResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "ub", "lb", "wall_ms"])
        for n, ub, lb, ms in result.history:
            w.writerow([n, repr(ub), repr(lb), f"{ms:.3f}"])
