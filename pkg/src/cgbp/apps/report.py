"""Human-readable and JSON reports for CG, BP and oracle runs."""
from __future__ import annotations

import json
import math

from ..branch_price import BpResult
from ..colgen import CONVERGED, CgResult, RepairFailed, round_to_integer
from ..model import CompactModel, IntegerSolution, verify_solution
from ..oracle import OracleResult
from .cutting_stock import CuttingStockInstance, roll_patterns
from .net_path import NetPathInstance, arc_loads, solution_paths


def _num(v):
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return None
    return float(v)


def _solution_section(model: CompactModel, sol: IntegerSolution | None, inst) -> dict:
    if sol is None:
        return {"verified": False}
    problems = verify_solution(model, sol)
    out = {"verified": not problems}
    if problems:
        out["violations"] = problems
    if isinstance(inst, CuttingStockInstance):
        pats = roll_patterns(sol, inst)
        out["rolls"] = sum(n for _, n in pats)
        out["patterns"] = [{"pieces": list(p), "count": n} for p, n in pats]
    elif isinstance(inst, NetPathInstance):
        loads = arc_loads(sol, inst)
        out["paths"] = [{"task": k, "nodes": p} for k, p in enumerate(solution_paths(sol, inst))]
        out["arc_loads"] = [{"from": a.tail, "to": a.head, "load": l, "capacity": a.capacity}
                            for a, l in zip(inst.arcs, loads) if l > 0]
        if any(l > a.capacity for a, l in zip(inst.arcs, loads)):
            out["verified"] = False
    else:
        out["x"] = [float(v) for v in sol.x]
    return out


def solution_report(model: CompactModel, result, instance=None) -> dict:
    """Report dict for ``result`` (CgResult, BpResult or OracleResult).

    ``solution.verified`` is true only when the integer solution satisfies
    every row of the compact model.
    """
    if isinstance(result, BpResult):
        if result.status == "Optimal":
            status = "optimal"
        elif result.status == "Infeasible":
            status = "infeasible"
        elif result.limited:
            status = "limit"
        else:
            status = "feasible" if result.solution is not None else "no_solution"
        rep = {"status": status, "objective": _num(result.objective),
               "bounds": {"lb": _num(result.lb), "ub": _num(result.ub)},
               "iterations": result.cg_iterations, "nodes": result.nodes, "wall_ms": round(result.wall_ms, 3),
               "termination": result.status, "optimal": result.status == "Optimal",
               "solution": _solution_section(model, result.solution, instance)}
    elif isinstance(result, CgResult):
        sol = None
        if not result.artificial_active:
            try:
                sol = round_to_integer(model, result)
            except RepairFailed:
                sol = None
        if result.artificial_active and result.converged:
            status = "infeasible"
        elif result.converged:
            status = "lp_optimal"
        else:
            status = "limit"
        rep = {"status": status, "objective": _num(result.objective),
               "bounds": {"lb": _num(result.lagrangian_lb), "ub": _num(sol.objective if sol else None)},
               "iterations": result.iterations, "nodes": 0, "wall_ms": round(result.wall_ms, 3),
               "termination": result.termination, "optimal": False,
               "columns_generated": result.columns_generated,
               "solution": _solution_section(model, sol, instance)}
        rep["solution"]["rounded"] = sol is not None
        rep["lp_converged"] = result.termination == CONVERGED
    elif isinstance(result, OracleResult):
        ok = result.status == "Optimal"
        rep = {"status": "optimal" if ok else "infeasible", "objective": _num(result.objective),
               "bounds": {"lb": _num(result.objective), "ub": _num(result.objective)},
               "iterations": 0, "nodes": result.nodes, "wall_ms": round(result.wall_ms, 3),
               "termination": result.status, "optimal": ok,
               "solution": _solution_section(model, result.solution, instance)}
    else:
        raise TypeError(f"cannot report on {type(result).__name__}")
    return rep


def format_report(rep: dict) -> str:
    lines = [f"status: {rep['status']} ({rep['termination']})",
             f"objective: {rep['objective']}",
             f"bounds: lb={rep['bounds']['lb']} ub={rep['bounds']['ub']}",
             f"iterations: {rep['iterations']}  nodes: {rep['nodes']}  wall: {rep['wall_ms']:.1f} ms"]
    sol = rep["solution"]
    lines.append(f"verified: {sol.get('verified')}")
    if "rolls" in sol:
        lines.append(f"rolls: {sol['rolls']}")
        for p in sol["patterns"]:
            lines.append(f"  {p['count']} x {p['pieces']}")
    if "paths" in sol:
        for p in sol["paths"]:
            lines.append(f"  task {p['task']}: {' -> '.join(map(str, p['nodes']))}")
        for a in sol["arc_loads"]:
            lines.append(f"  arc {a['from']}->{a['to']}: load {a['load']}/{a['capacity']}")
    return "\n".join(lines)


def dumps_report(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=True) + "\n"
