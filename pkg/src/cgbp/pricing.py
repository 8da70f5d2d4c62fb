"""Pricing oracles.

Given master duals, each block is asked for points of negative reduced cost

    rc(x) = (c - L^T pi) . x - sigma - sum(mu_B for set rows B containing x)

where ``L`` is the block's slice of the linking matrix. ``price_block``
dispatches on the block's structure tag; ``exact`` results certify the
block minimum, heuristic ones do not.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .lp_core import EQ, GE, LE, LpConfig, LpProblem, LpStatus, solve_lp
from .master import Column
from .model import GENERIC, KNAPSACK, PATH, BlockSubmodel

TOL_RC = 1e-9
GENERIC_NODE_LIMIT = 2_000_000


class PricingError(RuntimeError):
    """A block cannot be priced by the available pricers."""


class NoFeasiblePath(RuntimeError):
    pass


@dataclass
class PricerResult:
    columns: list = field(default_factory=list)
    reduced_costs: list = field(default_factory=list)
    best_reduced_cost: float = math.inf
    exact: bool = False

    def improving(self, tol: float = TOL_RC):
        return [(c, rc) for c, rc in zip(self.columns, self.reduced_costs) if rc < -tol]


@dataclass
class PricingRequest:
    sub: BlockSubmodel
    prices: np.ndarray  # per local variable
    sigma: float
    bounds: dict  # local var -> (lo, hi)
    set_rows: tuple = ()
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    max_columns: int = 5

    def domain(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.sub.lower.copy(), self.sub.upper.copy()
        for j, (l, u) in self.bounds.items():
            lo[j] = max(lo[j], l)
            hi[j] = min(hi[j], u)
        return lo, hi

    def set_bonus(self, x) -> float:
        return float(sum(self.mu[k] for k, r in enumerate(self.set_rows) if r.contains(x)))

    def reduced_cost(self, x) -> float:
        return float(self.prices @ x) - self.sigma - self.set_bonus(x)

    def column(self, x) -> Column:
        x = np.asarray(x, dtype=float)
        return Column(self.sub.block.id, float(self.sub.costs @ x), self.sub.link @ x, x)


def _result(req: PricerResult | None, req_: PricingRequest, points, best, exact) -> PricerResult:
    points = sorted(points, key=lambda p: (p[0], tuple(p[1])))
    cols, rcs = [], []
    seen = set()
    for rc, x in points:
        key = tuple(np.round(x, 9))
        if rc >= -TOL_RC or key in seen:
            continue
        seen.add(key)
        cols.append(req_.column(x))
        rcs.append(rc)
        if len(cols) >= req_.max_columns:
            break
    return PricerResult(cols, rcs, best, exact)


# --------------------------------------------------------------------------
# knapsack


def knapsack_dp(sizes, profits, capacity: int, upper=None, lower=None):
    """Bounded integer knapsack by dynamic programming over capacity.

    Maximises ``profits . a`` subject to ``sizes . a <= capacity`` and
    ``lower <= a <= upper``. Returns ``(a, value)``, or ``(None, -inf)`` when
    the lower bounds alone exceed the capacity.
    """
    sizes = [int(s) for s in sizes]
    if any(s <= 0 for s in sizes):
        raise ValueError("knapsack sizes must be positive integers")
    if capacity < 0 or int(capacity) != capacity:
        raise ValueError("knapsack capacity must be a nonnegative integer")
    capacity = int(capacity)
    n = len(sizes)
    profits = [float(p) for p in profits]
    lower = [0] * n if lower is None else [int(math.ceil(v - 1e-9)) for v in lower]
    upper = [capacity // s for s in sizes] if upper is None else [
        min(int(math.floor(u + 1e-9)) if np.isfinite(u) else capacity // s, capacity // s)
        for u, s in zip(upper, sizes)
    ]
    base = sum(s * l for s, l in zip(sizes, lower))
    if base > capacity or any(u < l for l, u in zip(lower, upper)):
        return None, -math.inf
    cap = capacity - base
    dp = [0.0] * (cap + 1)
    choice = []
    for i in range(n):
        s, v, extra = sizes[i], profits[i], upper[i] - lower[i]
        pick = [0] * (cap + 1)
        if extra > 0 and v > 0:
            new = dp[:]
            for c in range(s, cap + 1):
                best, bt = new[c], 0
                for t in range(1, min(extra, c // s) + 1):
                    val = dp[c - t * s] + t * v
                    if val > best + 1e-12:
                        best, bt = val, t
                new[c], pick[c] = best, bt
            dp = new
        choice.append(pick)
    a = [0] * n
    c = cap
    for i in range(n - 1, -1, -1):
        t = choice[i][c]
        a[i] = t
        c -= t * sizes[i]
    a = [x + l for x, l in zip(a, lower)]
    value = sum(p * x for p, x in zip(profits, a))
    return np.array(a, dtype=int), value


def _grid_cells(req: PricingRequest, lo, hi):
    """Split the block domain into boxes on which set-row membership is constant."""
    cuts = {j: {int(lo[j]), int(hi[j]) + 1} for j in range(len(lo))}
    for r in req.set_rows:
        for j, l, u in r.box:
            for v in (int(math.ceil(l - 1e-9)), int(math.floor(u + 1e-9)) + 1):
                if lo[j] < v <= hi[j]:
                    cuts[j].add(v)
    intervals = []
    for j in range(len(lo)):
        pts = sorted(v for v in cuts[j] if lo[j] <= v <= hi[j] + 1)
        intervals.append([(a, b - 1) for a, b in zip(pts, pts[1:])])
    return itertools.product(*intervals)


def _price_knapsack(req: PricingRequest, mode: str) -> PricerResult:
    sub = req.sub
    data = sub.block.data
    sizes = [int(s) for s in data["sizes"]]
    W = int(data["capacity"])
    items = list(data["item_vars"])
    use = data.get("use_var")
    lo, hi = req.domain()
    if np.any(lo > hi + 1e-9):
        return PricerResult([], [], math.inf, True)
    if use is None:
        # no roll variable: constant capacity
        lo = np.append(lo, 1)
        hi = np.append(hi, 1)
        use_idx = len(lo) - 1
    else:
        use_idx = use
    for j in range(len(lo)):
        if not np.isfinite(hi[j]):
            hi[j] = W // sizes[items.index(j)] if j in items else 1
    lo = np.ceil(lo - 1e-9)
    hi = np.floor(hi + 1e-9)
    profits = [-req.prices[j] for j in items]
    points = []
    best = math.inf
    n_local = sub.n_vars

    def finish(a, y):
        x = np.zeros(n_local)
        for k, j in enumerate(items):
            x[j] = a[k]
        if use is not None:
            x[use] = y
        return x

    if mode == "heuristic":
        for y in range(int(lo[use_idx]), int(hi[use_idx]) + 1):
            a = _greedy_knapsack(sizes, profits, W * y, [lo[j] for j in items], [hi[j] for j in items])
            if a is None:
                continue
            x = finish(a, y)
            rc = req.reduced_cost(x)
            best = min(best, rc)
            points.append((rc, x))
        return _result(None, req, points, best, False)

    best_cell = None
    for cell in _grid_cells(req, lo, hi):
        ylo, yhi = cell[use_idx]
        for y in range(ylo, yhi + 1):
            a, _ = knapsack_dp(sizes, profits, W * y, [cell[j][1] for j in items], [cell[j][0] for j in items])
            if a is None:
                continue
            x = finish(a, y)
            rc = req.reduced_cost(x)
            points.append((rc, x))
            if rc < best:
                best, best_cell = rc, (cell, y)
    if best_cell is not None and len(points) < req.max_columns:
        # extra columns: best pattern forced to contain each profitable item
        cell, y = best_cell
        for k, j in enumerate(items):
            if profits[k] <= 0:
                continue
            lows = [cell[jj][0] for jj in items]
            if lows[k] + 1 > cell[j][1]:
                continue
            lows[k] += 1
            a, _ = knapsack_dp(sizes, profits, W * y, [cell[jj][1] for jj in items], lows)
            if a is not None:
                x = finish(a, y)
                points.append((req.reduced_cost(x), x))
    return _result(None, req, points, best, True)


def _greedy_knapsack(sizes, profits, capacity, lower, upper):
    a = [int(l) for l in lower]
    room = capacity - sum(s * x for s, x in zip(sizes, a))
    if room < 0:
        return None
    order = sorted(range(len(sizes)), key=lambda i: (-profits[i] / sizes[i], i))
    for i in order:
        if profits[i] <= 0:
            continue
        t = min(int(upper[i]) - a[i], room // sizes[i])
        if t > 0:
            a[i] += t
            room -= t * sizes[i]
    return a


# --------------------------------------------------------------------------
# paths


@dataclass
class _Label:
    cost: float
    resource: float
    node: int
    visited: int  # node bitmask
    forced: int  # bitmask over forced arcs seen
    arcs: tuple


def _has_cycle(n_nodes, arcs) -> bool:
    adj = [[] for _ in range(n_nodes)]
    for t, h in arcs:
        adj[t].append(h)
    state = [0] * n_nodes
    for s in range(n_nodes):
        if state[s]:
            continue
        stack = [(s, iter(adj[s]))]
        state[s] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[v] = 2
                stack.pop()
            elif state[nxt] == 1:
                return True
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(adj[nxt])))
    return False


def rcsp_label_setting(n_nodes: int, arcs, prices, source: int, sink: int, limit: float = math.inf,
                       consumption=None, forbidden=(), forced=(), max_paths: int = 1):
    """Elementary resource-constrained shortest path by label setting.

    ``arcs`` is a list of ``(tail, head)``; ``consumption`` gives the resource
    use of each arc (default one unit, i.e. hop counting) and ``limit`` caps
    the total. Arc indices in ``forced`` must all appear on the path.
    Returns up to ``max_paths`` nondominated ``(price, arc indices)`` sink
    labels by increasing price; raises :class:`NoFeasiblePath` if none exist.
    """
    m = len(arcs)
    cons = np.ones(m) if consumption is None else np.asarray(consumption, dtype=float)
    if np.any(cons < 0):
        raise ValueError("arc resource consumption must be nonnegative")
    if np.any(cons <= 0) and _has_cycle(n_nodes, arcs):
        raise ValueError("exact label setting needs positive consumption on cyclic graphs")
    if source == sink:
        raise ValueError("source and sink coincide")
    banned = set(forbidden)
    forced = list(forced)
    fbit = {a: 1 << k for k, a in enumerate(forced)}
    full = (1 << len(forced)) - 1
    out = [[] for _ in range(n_nodes)]
    for a, (t, h) in enumerate(arcs):
        if a not in banned:
            out[t].append(a)
    # labels kept per node; settled in order of (resource, cost)
    kept: list[list[_Label]] = [[] for _ in range(n_nodes)]
    heap = []
    counter = itertools.count()
    start = _Label(0.0, 0.0, source, 1 << source, 0, ())
    heapq.heappush(heap, (0.0, 0.0, next(counter), start))
    kept[source].append(start)
    finished = []

    def dominated(lab: _Label) -> bool:
        for o in kept[lab.node]:
            if (o is not lab and o.cost <= lab.cost + 1e-12 and o.resource <= lab.resource + 1e-12
                    and (o.visited & ~lab.visited) == 0 and (lab.forced & ~o.forced) == 0):
                return True
        return False

    while heap:
        _, _, _, lab = heapq.heappop(heap)
        if lab not in kept[lab.node]:
            continue
        if lab.node == sink:
            if lab.forced == full:
                finished.append(lab)
            continue
        for a in out[lab.node]:
            h = arcs[a][1]
            if lab.visited >> h & 1:
                continue
            res = lab.resource + cons[a]
            if res > limit + 1e-9:
                continue
            new = _Label(lab.cost + float(prices[a]), res, h, lab.visited | (1 << h),
                         lab.forced | fbit.get(a, 0), lab.arcs + (a,))
            if dominated(new):
                continue
            kept[h] = [o for o in kept[h] if not (
                new.cost <= o.cost + 1e-12 and new.resource <= o.resource + 1e-12
                and (new.visited & ~o.visited) == 0 and (o.forced & ~new.forced) == 0)]
            kept[h].append(new)
            heapq.heappush(heap, (new.resource, new.cost, next(counter), new))
    finished = [f for f in finished if f in kept[sink]]
    if not finished:
        raise NoFeasiblePath(f"no feasible path from {source} to {sink}")
    finished.sort(key=lambda f: (f.cost, f.arcs))
    return [(f.cost, f.arcs) for f in finished[:max_paths]]


def _shortest_path(n_nodes, arcs, prices, source, sink, banned_arcs, banned_nodes):
    """Cheapest source-sink path avoiding the banned arcs and nodes, or None."""
    out = [[] for _ in range(n_nodes)]
    negative = False
    for a, (t, h) in enumerate(arcs):
        if a in banned_arcs or t in banned_nodes or h in banned_nodes:
            continue
        out[t].append(a)
        negative |= prices[a] < 0
    if not negative:
        dist = {source: (0.0, ())}
        heap = [(0.0, (), source)]
        done = set()
        while heap:
            d, path, v = heapq.heappop(heap)
            if v in done:
                continue
            done.add(v)
            if v == sink:
                return d, path
            for a in out[v]:
                h = arcs[a][1]
                nd = d + float(prices[a])
                cand = (nd, path + (a,))
                if h not in done and (h not in dist or cand < dist[h]):
                    dist[h] = cand
                    heapq.heappush(heap, (nd, path + (a,), h))
        return None
    # negative prices are only allowed on acyclic graphs: topological DP
    indeg = [0] * n_nodes
    for v in range(n_nodes):
        for a in out[v]:
            indeg[arcs[a][1]] += 1
    order = [v for v in range(n_nodes) if indeg[v] == 0]
    k = 0
    while k < len(order):
        v = order[k]
        k += 1
        for a in out[v]:
            h = arcs[a][1]
            indeg[h] -= 1
            if indeg[h] == 0:
                order.append(h)
    if len(order) < n_nodes:
        raise ValueError("negative arc prices on a cyclic graph")
    best = {source: (0.0, ())}
    for v in order:
        if v not in best:
            continue
        d, path = best[v]
        for a in out[v]:
            h = arcs[a][1]
            cand = (d + float(prices[a]), path + (a,))
            if h not in best or cand < best[h]:
                best[h] = cand
    return best.get(sink)


def _path_nodes(arcs, path, source):
    nodes = [source]
    for a in path:
        nodes.append(arcs[a][1])
    return nodes


def k_shortest_paths(n_nodes: int, arcs, prices, source: int, sink: int, K: int, forbidden=()):
    """Up to ``K`` loopless source-sink paths by nondecreasing price (Yen).

    Returns ``[(price, arc indices), ...]``; fewer than ``K`` when fewer
    paths exist. Negative prices are accepted only on acyclic graphs.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    prices = np.asarray(prices, dtype=float)
    banned = set(forbidden)
    first = _shortest_path(n_nodes, arcs, prices, source, sink, banned, set())
    if first is None:
        return []
    found = [first]
    candidates = []
    seen = {first[1]}
    while len(found) < K:
        _, last = found[-1]
        nodes = _path_nodes(arcs, last, source)
        for i in range(len(last)):
            spur = nodes[i]
            root = last[:i]
            root_cost = float(sum(prices[a] for a in root))
            cut = set(banned)
            for _, p in found:
                if p[:i] == root and len(p) > i:
                    cut.add(p[i])
            spur_path = _shortest_path(n_nodes, arcs, prices, spur, sink, cut, set(nodes[:i]))
            if spur_path is None:
                continue
            total = root + spur_path[1]
            if total in seen:
                continue
            seen.add(total)
            heapq.heappush(candidates, (root_cost + spur_path[0], total))
        if not candidates:
            break
        found.append(heapq.heappop(candidates))
    return [(float(c), p) for c, p in found]


def _price_path(req: PricingRequest, mode: str) -> PricerResult:
    sub = req.sub
    data = sub.block.data
    arcs = [tuple(a) for a in data["arcs"]]
    arc_vars = list(data["arc_vars"])
    n_nodes = int(data["n_nodes"])
    src, dst = int(data["source"]), int(data["sink"])
    hops = data.get("max_hops")
    limit = math.inf if hops is None else float(hops)
    if len(arc_vars) != sub.n_vars:
        raise PricingError("path block must consist of arc variables only")
    lo, hi = req.domain()
    prices = np.array([req.prices[j] for j in arc_vars])
    forbidden = [a for a, j in enumerate(arc_vars) if hi[j] < 0.5]
    forced = [a for a, j in enumerate(arc_vars) if lo[j] > 0.5]
    if req.set_rows:
        raise PricingError("set rows are not supported on path blocks")

    def point(path):
        x = np.zeros(sub.n_vars)
        for a in path:
            x[arc_vars[a]] = 1.0
        return x

    cyclic = _has_cycle(n_nodes, arcs)
    if mode == "heuristic":
        if cyclic and np.any(prices < 0):
            return PricerResult([], [], math.inf, False)
        paths = k_shortest_paths(n_nodes, arcs, prices, src, dst, max(req.max_columns, 1) + len(forced), forbidden)
        points = []
        for _, p in paths:
            if len(p) > limit or not set(forced) <= set(p):
                continue
            x = point(p)
            points.append((req.reduced_cost(x), x))
        best = min((rc for rc, _ in points), default=math.inf)
        return _result(None, req, points, best, False)

    # elementary paths contain an optimal block point only when no cycle can
    # lower the price
    exact = not (cyclic and np.any(prices < -TOL_RC))
    try:
        labels = rcsp_label_setting(n_nodes, arcs, prices, src, dst, limit, None, forbidden, forced,
                                    max_paths=max(req.max_columns, 1))
    except NoFeasiblePath:
        return PricerResult([], [], math.inf, exact)
    points = []
    for _, p in labels:
        x = point(p)
        points.append((req.reduced_cost(x), x))
    best = min(rc for rc, _ in points)
    return _result(None, req, points, best, exact)


# --------------------------------------------------------------------------
# generic blocks


def _price_generic(req: PricingRequest, mode: str) -> PricerResult:
    sub = req.sub
    lo, hi = req.domain()
    if np.any(lo > hi + 1e-9):
        return PricerResult([], [], math.inf, True)
    if mode == "heuristic":
        return PricerResult([], [], math.inf, False)
    if not np.any(sub.integer):
        if req.set_rows:
            raise PricingError("set rows need an integer block")
        lp = LpProblem(req.prices, sub.A, sub.senses, sub.rhs, lo, hi)
        sol = solve_lp(lp, LpConfig())
        if sol.status is LpStatus.INFEASIBLE:
            return PricerResult([], [], math.inf, True)
        if sol.status is not LpStatus.OPTIMAL:
            raise PricingError(f"block LP ended with status {sol.status.value}")
        x = sol.x
        rc = req.reduced_cost(x)
        return _result(None, req, [(rc, x)], rc, True)
    if not np.all(sub.integer) or not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise PricingError(f"block {sub.block.id}: generic pricing needs bounded integer variables")
    return _branch_and_bound(req, np.ceil(lo - 1e-9), np.floor(hi + 1e-9))


def _branch_and_bound(req: PricingRequest, lo, hi) -> PricerResult:
    sub = req.sub
    n = sub.n_vars
    p = req.prices
    A, b, senses = sub.A, sub.rhs, sub.senses
    # optimistic completion cost and row activity ranges of the suffix j..n-1
    best_tail = np.zeros(n + 1)
    rmin = np.zeros((A.shape[0], n + 1))
    rmax = np.zeros((A.shape[0], n + 1))
    for j in range(n - 1, -1, -1):
        best_tail[j] = best_tail[j + 1] + min(p[j] * lo[j], p[j] * hi[j])
        col_lo, col_hi = A[:, j] * lo[j], A[:, j] * hi[j]
        rmin[:, j] = rmin[:, j + 1] + np.minimum(col_lo, col_hi)
        rmax[:, j] = rmax[:, j + 1] + np.maximum(col_lo, col_hi)
    bonus_bound = sum(max(0.0, float(m)) for m in req.mu)
    is_le = np.array([s == LE for s in senses], dtype=bool)
    is_ge = np.array([s == GE for s in senses], dtype=bool)
    is_eq = np.array([s == EQ for s in senses], dtype=bool)
    x = np.zeros(n)
    state = {"best": math.inf, "nodes": 0}
    points = []

    def feasible(act, j):
        lo_act = act + rmin[:, j]
        hi_act = act + rmax[:, j]
        if np.any((is_le | is_eq) & (lo_act > b + 1e-9)):
            return False
        if np.any((is_ge | is_eq) & (hi_act < b - 1e-9)):
            return False
        return True

    def rec(j, act, partial):
        state["nodes"] += 1
        if state["nodes"] > GENERIC_NODE_LIMIT:
            raise PricingError("generic pricer node limit exceeded")
        bound = partial + best_tail[j] - req.sigma - bonus_bound
        if bound >= state["best"] - 1e-12 and (len(points) >= req.max_columns or bound >= -TOL_RC):
            return
        if j == n:
            rc = req.reduced_cost(x)
            if rc < state["best"]:
                state["best"] = rc
            if rc < -TOL_RC:
                points.append((rc, x.copy()))
                if len(points) > 50 * req.max_columns:
                    points.sort(key=lambda t: t[0])
                    del points[req.max_columns:]
            return
        values = range(int(lo[j]), int(hi[j]) + 1)
        if p[j] < 0:
            values = reversed(values)
        for v in values:
            x[j] = v
            new_act = act + A[:, j] * v
            if feasible(new_act, j + 1):
                rec(j + 1, new_act, partial + p[j] * v)
        x[j] = 0.0

    rec(0, np.zeros(A.shape[0]), 0.0)
    points.sort(key=lambda t: (t[0], tuple(t[1])))
    return _result(None, req, points[: max(req.max_columns * 4, 1)], state["best"], True)


# --------------------------------------------------------------------------

_DISPATCH = {KNAPSACK: _price_knapsack, PATH: _price_path, GENERIC: _price_generic}


def make_request(sub: BlockSubmodel, pi, sigma: float = 0.0, bounds=None, set_rows=(), mu=(),
                 max_columns: int = 5) -> PricingRequest:
    prices = sub.costs - sub.link.T @ np.asarray(pi, dtype=float)
    return PricingRequest(sub, prices, float(sigma), dict(bounds or {}), tuple(set_rows),
                          np.asarray(mu, dtype=float), max_columns)


def price_request(req: PricingRequest, mode: str = "exact") -> PricerResult:
    if mode not in ("exact", "heuristic"):
        raise ValueError(f"unknown pricing mode {mode!r}")
    result = _DISPATCH[req.sub.block.structure](req, mode)
    if mode == "exact" and not result.exact and req.sub.block.structure != GENERIC:
        # the specialised pricer could not certify its answer
        fallback = _price_generic(req, mode)
        if fallback.best_reduced_cost < result.best_reduced_cost or not result.columns:
            return fallback
        return PricerResult(result.columns, result.reduced_costs, fallback.best_reduced_cost, True)
    return result


def price_block(sub: BlockSubmodel, pi, sigma: float = 0.0, bounds=None, mode: str = "exact",
                set_rows=(), mu=(), max_columns: int = 5) -> PricerResult:
    """Search block ``sub`` for improving columns at duals ``(pi, sigma, mu)``.

    ``bounds`` maps local variable index to ``(lo, hi)``; returned columns
    respect them. An infeasible block gives an exact empty result with
    ``best_reduced_cost = +inf``.
    """
    return price_request(make_request(sub, pi, sigma, bounds, set_rows, mu, max_columns), mode)
