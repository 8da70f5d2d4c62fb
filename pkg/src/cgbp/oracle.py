"""Brute-force ground truth for small models.

Nothing here touches the master or the pricers; the only shared pieces are
the LP engine and the :class:`Column` record.
"""
from __future__ import annotations

import functools
import math
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .lp_core import EQ, GE, LE, LpProblem, LpStatus, solve_lp
from .master import Column
from .model import BlockSubmodel, CompactModel, IntegerSolution, block_submodel

POINT_LIMIT = 10**4
NODE_LIMIT = 10**6


class LimitExceeded(RuntimeError):
    pass


def enumerate_extreme_points(sub: BlockSubmodel, limit: int = POINT_LIMIT) -> list[Column]:
    """Every integer point of a bounded all-integer block, lexicographically.

    On 0/1 and general bounded integer blocks these include all integral
    extreme points of the block polytope.
    """
    n = sub.n_vars
    if not np.all(sub.integer):
        raise ValueError("enumeration needs an all-integer block")
    lo = np.ceil(sub.lower - 1e-9)
    hi = np.floor(sub.upper + 1e-9)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("enumeration needs finite variable bounds")
    if np.any(lo > hi):
        return []
    A, b, senses = sub.A, sub.rhs, sub.senses
    m = A.shape[0]
    # rows that contain each variable, and the activity range of each row's suffix
    rows_of = [[i for i in range(m) if A[i, j] != 0] for j in range(n)]
    smin = [[0.0] * (n + 1) for _ in range(m)]
    smax = [[0.0] * (n + 1) for _ in range(m)]
    for i in range(m):
        for j in range(n - 1, -1, -1):
            u, v = A[i, j] * lo[j], A[i, j] * hi[j]
            smin[i][j] = smin[i][j + 1] + min(u, v)
            smax[i][j] = smax[i][j + 1] + max(u, v)
    act = [0.0] * m
    x = [0] * n
    points = []

    def ok(i, nxt):
        lo_, hi_ = act[i] + smin[i][nxt], act[i] + smax[i][nxt]
        s = senses[i]
        if s != GE and lo_ > b[i] + 1e-9:
            return False
        if s != LE and hi_ < b[i] - 1e-9:
            return False
        return True

    if not all(ok(i, 0) for i in range(m)):
        return []

    def rec(j):
        if j == n:
            if len(points) >= limit:
                raise LimitExceeded(f"block {sub.block.id} has more than {limit} points")
            points.append(np.array(x, dtype=float))
            return
        for v in range(int(lo[j]), int(hi[j]) + 1):
            x[j] = v
            for i in rows_of[j]:
                act[i] += A[i, j] * v
            if all(ok(i, j + 1) for i in rows_of[j]):
                rec(j + 1)
            for i in rows_of[j]:
                act[i] -= A[i, j] * v
        x[j] = 0

    limit_rec = max(sys.getrecursionlimit(), n + 100)
    sys.setrecursionlimit(limit_rec)
    rec(0)
    bid = sub.block.id
    return [Column(bid, float(sub.costs @ p), sub.link @ p, p) for p in points]


@dataclass
class FullLp:
    status: str
    objective: float
    pi: np.ndarray
    sigma: dict
    columns: list
    weights: np.ndarray


def full_column_lp(model: CompactModel, limit: int = POINT_LIMIT) -> FullLp:
    """Master LP over every enumerated column of every block."""
    cols = []
    for blk in model.blocks:
        cols.extend(enumerate_extreme_points(block_submodel(model, blk.id), limit))
    link_A, senses, rhs = model.linking
    ordinary = [b.id for b in model.blocks if not b.aggregated]
    n, p = len(cols), len(rhs)
    A = np.zeros((p + len(ordinary), n))
    for k, c in enumerate(cols):
        A[:p, k] = c.linking_coeffs
        if c.block_id in ordinary:
            A[p + ordinary.index(c.block_id), k] = 1.0
    lp = LpProblem(np.array([c.cost for c in cols]), A, tuple(senses) + (EQ,) * len(ordinary),
                   np.concatenate([rhs, np.ones(len(ordinary))]))
    sol = solve_lp(lp)
    if sol.status is not LpStatus.OPTIMAL:
        return FullLp(sol.status.value, math.nan, np.zeros(p), {}, cols, np.zeros(n))
    sigma = {b: float(sol.duals[p + k]) for k, b in enumerate(ordinary)}
    return FullLp("Optimal", sol.objective, sol.duals[:p].copy(), sigma, cols, sol.x)


def min_reduced_cost(columns, pi, sigma: dict) -> float:
    """Smallest ``cost - pi.link - sigma_block`` over ``columns``."""
    best = math.inf
    for c in columns:
        rc = c.cost - float(np.dot(pi, c.linking_coeffs)) - sigma.get(c.block_id, 0.0)
        best = min(best, rc)
    return best


@dataclass
class OracleResult:
    status: str  # "Optimal" or "Infeasible"
    objective: float
    solution: IntegerSolution | None
    nodes: int = 0
    points: dict = field(default_factory=dict)  # block id -> number of enumerated points
    wall_ms: float = 0.0


def brute_force_mip(model: CompactModel, node_limit: int = NODE_LIMIT,
                    point_limit: int = POINT_LIMIT) -> OracleResult:
    """Exact integer optimum by exhaustive search over block points."""
    t0 = time.perf_counter()
    agg = [b for b in model.blocks if b.aggregated]
    if agg and len(agg) != len(model.blocks):
        raise ValueError("brute force handles all-aggregated or all-convexity models, not a mix")
    pts = {b.id: enumerate_extreme_points(block_submodel(model, b.id), point_limit) for b in model.blocks}
    res = _covering_dp(model, pts, node_limit) if agg else _product_search(model, pts, node_limit)
    res.wall_ms = (time.perf_counter() - t0) * 1e3
    return res


def _product_search(model, pts, node_limit):
    _, senses, rhs = model.linking
    order = [b.id for b in model.blocks]
    if any(not pts[b] for b in order):
        return OracleResult("Infeasible", math.inf, None, 0, {b: len(v) for b, v in pts.items()})
    per = [sorted(pts[b], key=lambda c: (c.cost, c.fingerprint)) for b in order]
    nb = len(order)
    p = len(rhs)
    # optimistic cost and row contributions of the blocks still to choose
    tail_cost = [0.0] * (nb + 1)
    tail_lo = np.zeros((nb + 1, p))
    tail_hi = np.zeros((nb + 1, p))
    for k in range(nb - 1, -1, -1):
        L = np.array([c.linking_coeffs for c in per[k]])
        tail_cost[k] = tail_cost[k + 1] + per[k][0].cost
        tail_lo[k] = tail_lo[k + 1] + L.min(axis=0)
        tail_hi[k] = tail_hi[k + 1] + L.max(axis=0)
    le = np.array([s != GE for s in senses], dtype=bool)
    ge = np.array([s != LE for s in senses], dtype=bool)
    best = {"obj": math.inf, "pick": None, "nodes": 0}
    pick = [None] * nb

    def rec(k, act, cost):
        best["nodes"] += 1
        if best["nodes"] > node_limit:
            raise LimitExceeded(f"more than {node_limit} search nodes")
        if cost + tail_cost[k] >= best["obj"] - 1e-9:
            return
        if np.any(le & (act + tail_lo[k] > rhs + 1e-9)) or np.any(ge & (act + tail_hi[k] < rhs - 1e-9)):
            return
        if k == nb:
            best["obj"], best["pick"] = cost, list(pick)
            return
        for c in per[k]:
            if cost + c.cost + tail_cost[k + 1] >= best["obj"] - 1e-9:
                break
            pick[k] = c
            rec(k + 1, act + c.linking_coeffs, cost + c.cost)

    rec(0, np.zeros(p), 0.0)
    counts = {b: len(v) for b, v in pts.items()}
    if best["pick"] is None:
        return OracleResult("Infeasible", math.inf, None, best["nodes"], counts)
    x = np.zeros(model.n_vars)
    for b, c in zip(order, best["pick"]):
        x[model.block_vars(b)] = c.original_values
    return OracleResult("Optimal", best["obj"], IntegerSolution(best["obj"], x), best["nodes"], counts)


def _covering_dp(model, pts, node_limit):
    """Minimum-cost multiset of points covering ``>=`` rows with nonnegative coefficients."""
    _, senses, rhs = model.linking
    if any(s != GE for s in senses):
        raise ValueError("aggregated brute force supports covering (>=) linking rows only")
    cols = [c for b in pts.values() for c in b]
    if any(c.cost < 0 or np.any(c.linking_coeffs < 0) for c in cols):
        raise ValueError("aggregated brute force needs nonnegative costs and coefficients")
    useful = [c for c in cols if np.any(c.linking_coeffs > 0)]
    need = tuple(int(math.ceil(v - 1e-9)) for v in rhs)
    if any(abs(v - round(v)) > 1e-9 for c in useful for v in c.linking_coeffs):
        raise ValueError("aggregated brute force needs integer coefficients")
    coeffs = [tuple(int(round(v)) for v in c.linking_coeffs) for c in useful]
    counter = [0]

    @functools.lru_cache(maxsize=None)
    def f(r):
        counter[0] += 1
        if counter[0] > node_limit:
            raise LimitExceeded(f"more than {node_limit} DP states")
        first = next((i for i, v in enumerate(r) if v > 0), None)
        if first is None:
            return 0.0, None
        best, arg = math.inf, None
        seen = {}
        for k, a in enumerate(coeffs):
            if a[first] <= 0:
                continue
            nxt = tuple(max(v - u, 0) for v, u in zip(r, a))
            cost = useful[k].cost
            if seen.get(nxt, math.inf) <= cost:
                continue
            seen[nxt] = cost
            val = cost + f(nxt)[0]
            if val < best - 1e-12:
                best, arg = val, k
        return best, arg

    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10 * sum(need) + 1000))
    try:
        obj, _ = f(need)
    finally:
        sys.setrecursionlimit(old)
    counts = {b: len(v) for b, v in pts.items()}
    if obj == math.inf:
        return OracleResult("Infeasible", math.inf, None, counter[0], counts)
    chosen = {}
    r = need
    while any(v > 0 for v in r):
        _, k = f(r)
        chosen[k] = chosen.get(k, 0) + 1
        r = tuple(max(v - u, 0) for v, u in zip(r, coeffs[k]))
    patterns = {}
    for k, n in sorted(chosen.items()):
        c = useful[k]
        patterns.setdefault(c.block_id, []).append((tuple(float(v) for v in c.original_values), n))
    for b in model.blocks:
        if sum(n for _, n in patterns.get(b.id, [])) > b.multiplicity:
            raise LimitExceeded(f"optimal cover exceeds the multiplicity of block {b.id}")
    sol = IntegerSolution(obj, np.zeros(model.n_vars), patterns)
    return OracleResult("Optimal", obj, sol, counter[0], counts)
