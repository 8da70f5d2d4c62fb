"""Column generation driver: LRMP solve, pricing round, add columns, repeat."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .lp_core import GE, LE, EQ
from .master import (TOL_INT, DualPrices, LrmpSolution, RmpState, add_columns, recover_original_solution,
                     solve_lrmp)
from .model import CompactModel, IntegerSolution, verify_solution
from .pricing import PricerResult, PricingRequest, make_request, price_request

log = logging.getLogger(__name__)

CONVERGED, ITERATION_CAP, TIME_LIMIT, STALLED = "Converged", "IterationCap", "TimeLimit", "Stalled"


class RepairFailed(RuntimeError):
    """Rounding could not produce a verified integer solution."""


@dataclass
class CgConfig:
    rc_tolerance: float = 1e-6
    max_iterations: int = 500
    columns_per_round: int = 5
    heuristic_then_exact: bool = True
    time_limit: float | None = None  # seconds
    workers: int = 1  # >1 prices blocks on a thread pool

    def __post_init__(self):
        if not self.rc_tolerance > 0:
            raise ValueError("rc_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.columns_per_round < 1:
            raise ValueError("columns_per_round must be at least 1")


@dataclass
class TraceRow:
    iteration: int
    lrmp_obj: float
    best_rc: float
    lagrangian_lb: float  # nan when the round was not exact
    columns_added: int
    wall_ms: float


@dataclass
class CgResult:
    objective: float
    duals: DualPrices
    weights: np.ndarray
    iterations: int
    columns_generated: int
    lagrangian_lb: float
    termination: str
    trace: list = field(default_factory=list)
    best_reduced_cost: float = math.nan
    artificial_active: bool = False  # original infeasible or under-initialized
    lrmp: LrmpSolution | None = None
    rmp: RmpState | None = None
    wall_ms: float = 0.0

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED


def lagrangian_bound(lrmp_objective: float, best_reduced_costs: dict, multiplicities: dict,
                     exact: bool = True) -> float:
    """Lower bound from one exact pricing round.

    ``best_reduced_costs`` maps block id to its certified minimum reduced
    cost; ``multiplicities`` maps block id to ``None`` for convexity blocks
    or the copy count of an aggregated block.
    """
    if not exact:
        raise ValueError("a Lagrangian bound needs exactly priced blocks")
    lb = float(lrmp_objective)
    for b, rc in best_reduced_costs.items():
        k = multiplicities[b]
        if k is None:
            if rc == math.inf:
                return math.inf
            lb += rc
        else:
            lb += k * min(rc, 0.0)
    return lb


def _requests(rmp: RmpState, duals: DualPrices, per_round: int) -> list[PricingRequest]:
    out = []
    for blk in rmp.model.blocks:
        sub = rmp.subs[blk.id]
        idx = [k for k, r in enumerate(rmp.set_rows) if r.block_id == blk.id]
        out.append(make_request(
            sub, duals.pi, duals.sigma.get(blk.id, 0.0), rmp.local_bounds(blk.id),
            [rmp.set_rows[k] for k in idx], duals.mu[idx] if idx else (), per_round))
    return out


def _price_all(requests, pricers, mode, workers) -> list[PricerResult]:
    def one(req):
        fn = (pricers or {}).get(req.sub.block.id, price_request)
        return fn(req, mode)

    if workers > 1 and len(requests) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, requests))
    return [one(r) for r in requests]


def run_cg(model: CompactModel, rmp: RmpState, pricers: dict | None = None,
           config: CgConfig | None = None) -> CgResult:
    """Iterate LRMP and pricing until no block prices negative or a cap binds.

    ``pricers`` optionally maps block id to ``fn(request, mode) -> PricerResult``;
    blocks without an entry use the structure-tag dispatch.
    """
    cfg = config or CgConfig()
    t0 = time.perf_counter()
    mult = {b.id: b.multiplicity for b in model.blocks}
    trace = []
    best_lb = -math.inf
    generated = 0
    it = 0
    while True:
        it += 1
        sol = solve_lrmp(rmp)
        reqs = _requests(rmp, sol.duals, cfg.columns_per_round)
        exact = not cfg.heuristic_then_exact
        results = _price_all(reqs, pricers, "exact" if exact else "heuristic", cfg.workers)
        eps = cfg.rc_tolerance
        if not exact and not any(r.improving(eps) for r in results):
            exact = True
            results = _price_all(reqs, pricers, "exact", cfg.workers)
        exact = exact and all(r.exact for r in results)
        best_rc = min((r.best_reduced_cost for r in results), default=math.inf)
        lb = math.nan
        if exact:
            lb = lagrangian_bound(sol.objective, {rq.sub.block.id: r.best_reduced_cost
                                                  for rq, r in zip(reqs, results)}, mult)
            best_lb = max(best_lb, lb)
        elapsed = time.perf_counter() - t0
        improving = [c for r in results for c, _ in r.improving(eps)]
        term = None
        added = 0
        if exact and best_rc >= -eps:
            term = CONVERGED
        elif it >= cfg.max_iterations:
            term = ITERATION_CAP
        elif cfg.time_limit is not None and elapsed >= cfg.time_limit:
            term = TIME_LIMIT
        else:
            improving.sort(key=lambda c: (c.block_id, c.fingerprint))
            added = add_columns(rmp, improving)
            generated += added
            if added == 0:
                log.warning("pricing returned only known columns (best rc %.3g); stopping", best_rc)
                term = STALLED
        trace.append(TraceRow(it, sol.objective, best_rc, lb, added, elapsed * 1e3))
        log.debug("cg it=%d obj=%.9g best_rc=%.3g lb=%.6g added=%d", it, sol.objective, best_rc, lb, added)
        if term is not None:
            break
    return CgResult(
        objective=sol.objective, duals=sol.duals, weights=sol.weights, iterations=it,
        columns_generated=generated, lagrangian_lb=best_lb, termination=term, trace=trace,
        best_reduced_cost=best_rc, artificial_active=sol.artificial_active, lrmp=sol, rmp=rmp,
        wall_ms=(time.perf_counter() - t0) * 1e3)


def write_trace(result: CgResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "lrmp_obj", "best_rc", "lagrangian_lb", "columns_added", "wall_ms"])
        for r in result.trace:
            w.writerow([r.iteration, repr(r.lrmp_obj), repr(r.best_rc), repr(r.lagrangian_lb),
                        r.columns_added, f"{r.wall_ms:.3f}"])


# --------------------------------------------------------------------------
# rounding


def _fits(act, coeffs, senses, rhs, tol=1e-9) -> bool:
    new = act + coeffs
    for i, s in enumerate(senses):
        if s in (LE, EQ) and new[i] > rhs[i] + tol and coeffs[i] > 0:
            return False
    return True


def round_to_integer(model: CompactModel, result: CgResult, pricers: dict | None = None,
                     tol: float = TOL_INT) -> IntegerSolution:
    """Greedy rounding of a CG result plus one pricing-based repair pass.

    Raises :class:`RepairFailed` when the assembled solution does not verify
    against the compact model.
    """
    rmp = result.rmp
    if rmp is None:
        raise RepairFailed("result carries no master")
    if result.artificial_active:
        raise RepairFailed("artificial columns are active")
    weights = np.asarray(result.weights, dtype=float)
    _, senses, rhs = model.linking
    act = np.zeros(len(rhs))
    x = np.zeros(model.n_vars)
    patterns = {}
    objective = 0.0
    cols = list(zip(rmp.columns, weights))

    def price(block_id, pi, bounds, k):
        req = make_request(rmp.subs[block_id], pi, 0.0, bounds, (), (), k)
        fn = (pricers or {}).get(block_id, price_request)
        return fn(req, "exact")

    # ordinary blocks: one column each, by decreasing weight
    chosen = {}
    ordinary = [b.id for b in model.blocks if not b.aggregated]
    ranked = sorted(((w, c) for c, w in cols if c.block_id in ordinary and w > tol),
                    key=lambda t: (-t[0], t[1].block_id, t[1].fingerprint))
    for w, c in ranked:
        if c.block_id in chosen or not _fits(act, c.linking_coeffs, senses, rhs):
            continue
        chosen[c.block_id] = c
        act += c.linking_coeffs
    for b in ordinary:
        if b in chosen:
            continue
        # repair: cheapest block point that still fits the residual capacities
        sub = rmp.subs[b]
        resid = rhs - act
        bounds = {}
        for j in range(sub.n_vars):
            use = sub.link[:, j]
            if any(s in (LE, EQ) and use[i] > resid[i] + 1e-9 for i, s in enumerate(senses)):
                bounds[j] = (sub.lower[j], 0.0)
        res = price(b, np.zeros(len(rhs)), bounds, 20)
        fit = [c for c in res.columns if _fits(act, c.linking_coeffs, senses, rhs)]
        if not fit:
            raise RepairFailed(f"block {b}: no block point fits the residual capacity")
        chosen[b] = fit[0]
        act += fit[0].linking_coeffs
    for b, c in chosen.items():
        x[rmp.subs[b].var_index] = c.original_values
        objective += c.cost

    # aggregated blocks: floor the counts, round up by decreasing fraction, repair
    for blk in model.blocks:
        if not blk.aggregated:
            continue
        own = [(c, w) for c, w in cols if c.block_id == blk.id and w > tol]
        counts = {}
        for c, w in own:
            n = int(math.floor(w + tol))
            if n:
                counts[c.fingerprint] = [c, n]
                act += n * c.linking_coeffs
        fracs = sorted(((w - math.floor(w + tol), c) for c, w in own if w - math.floor(w + tol) > tol),
                       key=lambda t: (-t[0], t[1].fingerprint))

        def short():
            return [i for i, s in enumerate(senses) if s in (GE, EQ) and act[i] < rhs[i] - 1e-9]

        for _, c in fracs:
            need = short()
            if not need:
                break
            if any(c.linking_coeffs[i] > 1e-12 for i in need):
                counts.setdefault(c.fingerprint, [c, 0])[1] += 1
                act += c.linking_coeffs
        guard = blk.multiplicity
        while short() and guard > 0:
            guard -= 1
            pi = np.zeros(len(rhs))
            pi[short()] = 1.0
            res = price(blk.id, pi, {}, 1)
            if not res.columns:
                break
            c = res.columns[0]
            counts.setdefault(c.fingerprint, [c, 0])[1] += 1
            act += c.linking_coeffs
        used = sorted(counts.values(), key=lambda t: t[0].fingerprint)
        patterns[blk.id] = [(tuple(float(v) for v in c.original_values), n) for c, n in used if n > 0]
        objective += sum(n * c.cost for c, n in used)

    sol = IntegerSolution(objective, x, patterns)
    problems = verify_solution(model, sol)
    if problems:
        raise RepairFailed("; ".join(problems[:3]))
    return sol
