"""Service-path allocation on a capacitated network.

Each task routes its demand along one path from its source to its sink.
Tasks are the blocks (binary arc-usage variables with flow conservation);
arc capacities are the linking rows shared by all tasks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lp_core import EQ, LE
from ..master import Column, make_column
from ..model import PATH, Block, CompactModel, Row, Variable
from ..pricing import NoFeasiblePath, k_shortest_paths, rcsp_label_setting
from .cutting_stock import InstanceError, _is_int


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    cost: float
    capacity: int


@dataclass(frozen=True)
class Task:
    src: int
    dst: int
    demand: int
    max_hops: int | None = None


@dataclass(frozen=True)
class NetPathInstance:
    nodes: int
    arcs: tuple
    tasks: tuple

    def __post_init__(self):
        if not _is_int(self.nodes) or self.nodes < 2:
            raise InstanceError("nodes must be an integer >= 2")
        for k, a in enumerate(self.arcs):
            if not (0 <= a.tail < self.nodes and 0 <= a.head < self.nodes) or a.tail == a.head:
                raise InstanceError(f"arcs[{k}] has invalid endpoints")
            if not _is_int(a.capacity) or a.capacity <= 0:
                raise InstanceError(f"arcs[{k}].capacity must be a positive integer")
            if not np.isfinite(a.cost) or a.cost < 0:
                raise InstanceError(f"arcs[{k}].cost must be a nonnegative number")
        if not self.tasks:
            raise InstanceError("at least one task is required")
        for k, t in enumerate(self.tasks):
            if not (0 <= t.src < self.nodes and 0 <= t.dst < self.nodes):
                raise InstanceError(f"tasks[{k}] has invalid endpoints")
            if t.src == t.dst:
                raise InstanceError(f"tasks[{k}]: src equals dst")
            if not _is_int(t.demand) or t.demand < 1:
                raise InstanceError(f"tasks[{k}].demand must be a positive integer")
            if t.max_hops is not None and (not _is_int(t.max_hops) or t.max_hops < 1):
                raise InstanceError(f"tasks[{k}].max_hops must be a positive integer")

    def to_dict(self) -> dict:
        return {
            "type": "net_path",
            "nodes": int(self.nodes),
            "arcs": [{"from": a.tail, "to": a.head, "cost": a.cost, "capacity": a.capacity} for a in self.arcs],
            "tasks": [{"src": t.src, "dst": t.dst, "demand": t.demand,
                       **({} if t.max_hops is None else {"max_hops": t.max_hops})} for t in self.tasks],
        }


def build_net_path(inst: NetPathInstance) -> CompactModel:
    m = len(inst.arcs)
    variables, costs, rows, blocks = [], [], [], []
    for k, t in enumerate(inst.tasks):
        base = k * m
        for a, arc in enumerate(inst.arcs):
            variables.append(Variable(f"use{k}_{arc.tail}_{arc.head}", k, 0, 1, True))
            costs.append(float(t.demand * arc.cost))
        for v in range(inst.nodes):
            coeffs = {}
            for a, arc in enumerate(inst.arcs):
                if arc.tail == v:
                    coeffs[base + a] = coeffs.get(base + a, 0) + 1
                if arc.head == v:
                    coeffs[base + a] = coeffs.get(base + a, 0) - 1
            rhs = 1 if v == t.src else -1 if v == t.dst else 0
            if coeffs or rhs:
                rows.append(Row.make(coeffs, EQ, rhs, f"flow{k}_{v}", block=k))
        if t.max_hops is not None:
            rows.append(Row.make({base + a: 1 for a in range(m)}, LE, t.max_hops, f"hops{k}", block=k))
        data = {"arcs": [(a.tail, a.head) for a in inst.arcs], "arc_vars": list(range(m)),
                "n_nodes": inst.nodes, "source": t.src, "sink": t.dst, "max_hops": t.max_hops}
        blocks.append(Block(k, f"task{k}", PATH, data=data))
    for a, arc in enumerate(inst.arcs):
        coeffs = {k * m + a: t.demand for k, t in enumerate(inst.tasks)}
        rows.append(Row.make(coeffs, LE, arc.capacity, f"cap_{arc.tail}_{arc.head}"))
    return CompactModel(tuple(variables), tuple(costs), tuple(rows), tuple(blocks), "net_path")


def task_paths(inst: NetPathInstance, k: int, K: int = 3) -> list[tuple]:
    """Up to ``K`` cheapest loopless paths of task ``k`` within its hop limit."""
    t = inst.tasks[k]
    arcs = [(a.tail, a.head) for a in inst.arcs]
    prices = [a.cost for a in inst.arcs]
    limit = t.max_hops
    found = k_shortest_paths(inst.nodes, arcs, prices, t.src, t.dst, K if limit is None else 4 * K)
    paths = [p for _, p in found if limit is None or len(p) <= limit][:K]
    if not paths and limit is not None:
        try:
            paths = [p for _, p in rcsp_label_setting(inst.nodes, arcs, prices, t.src, t.dst, limit)]
        except NoFeasiblePath:
            paths = []
    return paths


def warm_start(model: CompactModel, inst: NetPathInstance, K: int = 3) -> list[Column]:
    """The ``K`` cheapest paths per task, capacities ignored."""
    m = len(inst.arcs)
    cols = []
    for k in range(len(inst.tasks)):
        for p in task_paths(inst, k, K):
            x = np.zeros(m)
            x[list(p)] = 1
            cols.append(make_column(model, k, x))
    return cols


def solution_paths(sol, inst: NetPathInstance) -> list[list[int]]:
    """Node sequence of each task's path in an integer solution."""
    m = len(inst.arcs)
    out = []
    for k, t in enumerate(inst.tasks):
        used = {a for a in range(m) if sol.x[k * m + a] > 0.5}
        nxt = {inst.arcs[a].tail: inst.arcs[a].head for a in used}
        path = [t.src]
        while path[-1] != t.dst and path[-1] in nxt and len(path) <= inst.nodes:
            path.append(nxt[path[-1]])
        out.append(path)
    return out


def arc_loads(sol, inst: NetPathInstance) -> list[int]:
    m = len(inst.arcs)
    return [int(round(sum(t.demand * sol.x[k * m + a] for k, t in enumerate(inst.tasks)))) for a in range(m)]
