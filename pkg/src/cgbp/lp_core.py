"""Dense bounded-variable revised simplex.

Solves ``min c.x  s.t.  A x (<=|>=|=) b,  l <= x <= u`` and returns both the
primal point and the row duals. Duals follow the usual minimisation sign
convention: ``y_i <= 0`` on ``<=`` rows, ``y_i >= 0`` on ``>=`` rows.

The engine keeps an explicit basis inverse and updates it with a rank-one
pivot; it is refactorised every ``refactor_every`` pivots. Sizes in this
package stay in the low thousands of columns, where this is plenty.
"""
from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LE, GE, EQ = "<=", ">=", "="
RELATIONS = (LE, GE, EQ)


class MalformedProblem(ValueError):
    """Raised for dimension mismatches, NaNs and inverted bounds."""


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class LpProblem:
    """A minimisation LP over ``n`` variables and ``m`` rows."""

    costs: np.ndarray
    A: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float).reshape(-1)
        n = self.costs.shape[0]
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = np.zeros((0, n))
        if A.ndim != 2 or A.shape[1] != n:
            raise MalformedProblem(f"constraint matrix has shape {A.shape}, expected (m, {n})")
        self.A = A
        self.senses = tuple(self.senses)
        self.rhs = np.asarray(self.rhs, dtype=float).reshape(-1)
        m = A.shape[0]
        if len(self.senses) != m or self.rhs.shape[0] != m:
            raise MalformedProblem(
                f"{m} rows but {len(self.senses)} relations and {self.rhs.shape[0]} right-hand sides"
            )
        bad = [s for s in self.senses if s not in RELATIONS]
        if bad:
            raise MalformedProblem(f"unknown relation(s) {bad}")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if self.lower.shape[0] != n or self.upper.shape[0] != n:
            raise MalformedProblem("bound vectors must have one entry per variable")
        for name, arr in (("costs", self.costs), ("A", self.A), ("rhs", self.rhs)):
            if not np.all(np.isfinite(arr)):
                raise MalformedProblem(f"non-finite entry in {name}")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise MalformedProblem("NaN bound")
        if np.any(self.lower > self.upper):
            j = int(np.argmax(self.lower > self.upper))
            raise MalformedProblem(f"variable {j} has lower bound {self.lower[j]} > upper bound {self.upper[j]}")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise MalformedProblem("infinite bound on the wrong side")

    @classmethod
    def from_rows(cls, costs, rows, lower=None, upper=None) -> "LpProblem":
        """Build from ``[(coeffs, relation, rhs), ...]``."""
        costs = np.asarray(costs, dtype=float)
        if rows:
            lengths = {len(r[0]) for r in rows}
            if lengths != {costs.shape[0]}:
                raise MalformedProblem(f"row lengths {sorted(lengths)} do not match {costs.shape[0]} variables")
            A = np.array([r[0] for r in rows], dtype=float)
        else:
            A = np.zeros((0, costs.shape[0]))
        return cls(costs, A, tuple(r[1] for r in rows), [r[2] for r in rows], lower, upper)

    @property
    def n_vars(self) -> int:
        return self.costs.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def dump(self) -> str:
        """Fixed-format plain-text rendering, meant for bug reports."""
        out = io.StringIO()
        out.write(f"LP {self.n_rows} rows {self.n_vars} cols\n")
        out.write("COST " + " ".join(f"{c:.17g}" for c in self.costs) + "\n")
        for i in range(self.n_rows):
            coeffs = " ".join(f"{a:.17g}" for a in self.A[i])
            out.write(f"ROW {i:5d} {self.senses[i]:>2} {self.rhs[i]:.17g} : {coeffs}\n")
        for j in range(self.n_vars):
            out.write(f"BND {j:5d} {self.lower[j]:.17g} {self.upper[j]:.17g}\n")
        return out.getvalue()


@dataclass
class LpConfig:
    tol_feas: float = 1e-9
    tol_opt: float = 1e-7
    max_iterations: int | None = None  # None -> 50 * (rows + cols)
    pivot_rule: str = "dantzig"  # "dantzig" falls back to Bland on degenerate stalls; "bland" always
    degenerate_switch: int = 30
    refactor_every: int = 40
    tol_pivot: float = 1e-9


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    duals: np.ndarray
    objective: float
    iterations: int
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    basis: tuple = ()
    at_upper: tuple = ()

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class KktReport:
    primal_violation: float
    dual_violation: float
    complementarity: float
    duality_gap: float

    def ok(self, tol: float = 1e-6) -> bool:
        return max(self.primal_violation, self.dual_violation, self.complementarity, self.duality_gap) <= tol


# variable status codes inside the solver
_BASIC, _LOWER, _UPPER, _FREE = 0, 1, 2, 3


class _Simplex:
    def __init__(self, problem: LpProblem, config: LpConfig):
        self.p = problem
        self.cfg = config
        m, n = problem.n_rows, problem.n_vars
        self.m, self.n = m, n
        slack_cols = []
        self.slack_of_row = [-1] * m
        for i, s in enumerate(problem.senses):
            if s == EQ:
                continue
            col = np.zeros(m)
            col[i] = 1.0 if s == LE else -1.0
            self.slack_of_row[i] = n + len(slack_cols)
            slack_cols.append(col)
        self.n_slack = len(slack_cols)
        blocks = [problem.A]
        if slack_cols:
            blocks.append(np.column_stack(slack_cols))
        self.A = np.hstack(blocks) if len(blocks) > 1 else problem.A.copy()
        ns = n + self.n_slack
        self.lo = np.concatenate([problem.lower, np.zeros(self.n_slack)])
        self.hi = np.concatenate([problem.upper, np.full(self.n_slack, np.inf)])
        self.c = np.concatenate([problem.costs, np.zeros(self.n_slack)])
        self.n_struct = ns
        self.art_row: list[int] = []  # row of each artificial column
        self.iterations = 0
        limit = config.max_iterations
        self.max_iter = limit if limit is not None else 50 * (m + n)

    # ------------------------------------------------------------------ setup
    def _nonbasic_value(self, j: int) -> tuple[float, int]:
        lo, hi = self.lo[j], self.hi[j]
        if np.isfinite(lo):
            return lo, _LOWER
        if np.isfinite(hi):
            return hi, _UPPER
        return 0.0, _FREE

    def _add_artificial(self, row: int, sign: float) -> int:
        col = np.zeros(self.m)
        col[row] = sign
        self.A = np.column_stack([self.A, col])
        self.lo = np.append(self.lo, 0.0)
        self.hi = np.append(self.hi, np.inf)
        self.c = np.append(self.c, 0.0)
        self.art_row.append(row)
        return self.A.shape[1] - 1

    def _cold_start(self) -> list[int]:
        total = self.n_struct
        self.x = np.zeros(total)
        self.status = np.zeros(total, dtype=int)
        for j in range(total):
            self.x[j], self.status[j] = self._nonbasic_value(j)
        resid = self.p.rhs - self.A @ self.x
        basis = []
        artificials = []
        for i in range(self.m):
            s = self.slack_of_row[i]
            sign = 1.0 if self.p.senses[i] == LE else -1.0
            if s >= 0 and sign * resid[i] >= -self.cfg.tol_feas:
                basis.append(s)
                continue
            artificials.append((i, 1.0 if resid[i] >= 0 else -1.0))
            basis.append(-1)
        for i, sign in artificials:
            j = self._add_artificial(i, sign)
            basis[i] = j
        self.x = np.concatenate([self.x, np.zeros(len(artificials))])
        self.status = np.concatenate([self.status, np.zeros(len(artificials), dtype=int)])
        for j in basis:
            self.status[j] = _BASIC
        return basis

    def _warm_start(self, tags: Sequence, at_upper: Sequence[int]) -> list[int] | None:
        if len(tags) != self.m:
            return None
        total = self.n_struct
        basis = []
        for kind, idx in tags:
            if kind == "x" and 0 <= idx < self.n:
                basis.append(idx)
            elif kind == "s" and 0 <= idx < self.m and self.slack_of_row[idx] >= 0:
                basis.append(self.slack_of_row[idx])
            else:
                return None
        if len(set(basis)) != self.m:
            return None
        self.x = np.zeros(total)
        self.status = np.zeros(total, dtype=int)
        upper = set(at_upper)
        for j in range(total):
            if j in basis:
                self.status[j] = _BASIC
                continue
            if j in upper and np.isfinite(self.hi[j]):
                self.x[j], self.status[j] = self.hi[j], _UPPER
            else:
                self.x[j], self.status[j] = self._nonbasic_value(j)
        B = self.A[:, basis]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(Binv)) or np.linalg.cond(B) > 1e10:
            return None
        xb = Binv @ (self.p.rhs - self.A @ np.where(self.status == _BASIC, 0.0, self.x))
        tol = self.cfg.tol_feas * 10
        if np.any(xb < self.lo[basis] - tol) or np.any(xb > self.hi[basis] + tol):
            return None
        self.x[basis] = np.clip(xb, self.lo[basis], self.hi[basis])
        return basis

    # ------------------------------------------------------------ mechanics
    def _refactor(self, basis):
        self.Binv = np.linalg.inv(self.A[:, basis])
        nb = np.where(self.status == _BASIC, 0.0, self.x)
        self.x[basis] = self.Binv @ (self.p.rhs - self.A @ nb)

    def _iterate(self, basis: list[int], cost: np.ndarray) -> LpStatus | None:
        """Run pivots until optimal for ``cost``; returns a terminal status or None when optimal."""
        cfg = self.cfg
        self._refactor(basis)
        since_refactor = 0
        degenerate_run = 0
        bland = cfg.pivot_rule == "bland"
        fixed = self.lo == self.hi
        while True:
            if self.iterations >= self.max_iter:
                return LpStatus.ITERATION_LIMIT
            y = cost[basis] @ self.Binv
            rc = cost - y @ self.A
            st = self.status
            elig = (
                ((st == _LOWER) & (rc < -cfg.tol_opt))
                | ((st == _UPPER) & (rc > cfg.tol_opt))
                | ((st == _FREE) & (np.abs(rc) > cfg.tol_opt))
            ) & ~fixed
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return None
            if bland or degenerate_run >= cfg.degenerate_switch:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(rc[cand]))])
            direction = 1.0 if rc[q] < 0 else -1.0
            d = self.Binv @ self.A[:, q]
            delta = -direction * d  # change of basic values per unit step
            xb = self.x[basis]
            lob, hib = self.lo[basis], self.hi[basis]
            ratios = np.full(self.m, np.inf)
            dec = delta < -cfg.tol_pivot
            inc = delta > cfg.tol_pivot
            ratios[dec] = (xb[dec] - lob[dec]) / -delta[dec]
            ratios[inc] = (hib[inc] - xb[inc]) / delta[inc]
            ratios = np.maximum(ratios, 0.0)
            flip = self.hi[q] - self.lo[q]
            theta = min(float(ratios.min()), flip)
            if not np.isfinite(theta):
                return LpStatus.UNBOUNDED
            if flip <= theta:
                # bound flip of the entering variable, no basis change
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                self.status[q] = _UPPER if direction > 0 else _LOWER
                self.x[basis] = xb + flip * delta
                self.iterations += 1
                degenerate_run = 0
                continue
            ties = np.flatnonzero(ratios <= theta + 1e-12 * max(1.0, theta))
            # artificials leave first, then lowest column index
            leave = int(min(ties, key=lambda r: (basis[r] < self.n_struct, basis[r])))
            self.x[basis] = xb + theta * delta
            self.x[q] = self.x[q] + direction * theta
            out = basis[leave]
            if delta[leave] < 0:
                self.x[out], self.status[out] = self.lo[out], _LOWER
            else:
                self.x[out], self.status[out] = self.hi[out], _UPPER
            if out >= self.n_struct:
                # artificials never come back
                self.hi[out] = 0.0
                fixed[out] = True
            basis[leave] = q
            self.status[q] = _BASIC
            piv = d[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(d, row)
            self.Binv[leave] = row
            self.iterations += 1
            degenerate_run = degenerate_run + 1 if theta <= cfg.tol_feas else 0
            since_refactor += 1
            if since_refactor >= cfg.refactor_every:
                self._refactor(basis)
                since_refactor = 0

    def run(self, warm_basis=None, at_upper=()) -> LpSolution:
        basis = None
        if warm_basis is not None:
            basis = self._warm_start(warm_basis, at_upper)
        if basis is None:
            self.art_row = []
            basis = self._cold_start()
        n_art = len(self.art_row)
        if n_art:
            phase1 = np.zeros(self.A.shape[1])
            phase1[self.n_struct:] = 1.0
            status = self._iterate(basis, phase1)
            if status is LpStatus.ITERATION_LIMIT:
                return self._result(status, basis)
            infeas = float(self.x[self.n_struct:].sum())
            scale = 1.0 + float(np.max(np.abs(self.p.rhs), initial=0.0))
            if infeas > self.cfg.tol_feas * 10 * scale:
                return self._result(LpStatus.INFEASIBLE, basis)
            self.hi[self.n_struct:] = 0.0
            self.x[self.n_struct:] = 0.0
        status = self._iterate(basis, self.c)
        return self._result(status or LpStatus.OPTIMAL, basis)

    def _result(self, status: LpStatus, basis: list[int]) -> LpSolution:
        n, m = self.n, self.m
        if status is LpStatus.OPTIMAL:
            B = self.A[:, basis]
            nb = np.where(self.status == _BASIC, 0.0, self.x)
            self.x[basis] = np.linalg.solve(B, self.p.rhs - self.A @ nb)
            y = np.linalg.solve(B.T, self.c[basis])
        else:
            y = np.full(m, np.nan)
        x = self.x[:n].copy()
        rc = self.p.costs - y @ self.p.A if status is LpStatus.OPTIMAL else np.full(n, np.nan)
        obj = float(self.p.costs @ x) if status in (LpStatus.OPTIMAL, LpStatus.ITERATION_LIMIT) else math.nan
        if status is LpStatus.UNBOUNDED:
            obj = -math.inf
        tags = []
        slack_row = {s: i for i, s in enumerate(self.slack_of_row) if s >= 0}
        for j in basis:
            if j < n:
                tags.append(("x", j))
            elif j < self.n_struct:
                tags.append(("s", slack_row[j]))
            else:
                tags.append(("a", self.art_row[j - self.n_struct]))
        at_upper = tuple(int(j) for j in np.flatnonzero(self.status[:n] == _UPPER))
        return LpSolution(status, x, y, obj, self.iterations, rc, tuple(tags), at_upper)


def solve_lp(problem: LpProblem, config: LpConfig | None = None, warm_basis=None, at_upper=()) -> LpSolution:
    """Solve ``problem``; ``warm_basis`` is an optional basis from a previous solve.

    The warm basis is only used when it is nonsingular and primal feasible for
    this problem; otherwise a two-phase cold start runs.
    """
    cfg = config or LpConfig()
    return _Simplex(problem, cfg).run(warm_basis, at_upper)


def reduced_costs(problem: LpProblem, duals) -> np.ndarray:
    duals = np.asarray(duals, dtype=float).reshape(-1)
    if duals.shape[0] != problem.n_rows:
        raise MalformedProblem(f"{duals.shape[0]} duals for {problem.n_rows} rows")
    return problem.costs - duals @ problem.A


def verify_kkt(problem: LpProblem, solution: LpSolution) -> KktReport:
    """Measure how far ``solution`` is from satisfying the optimality conditions."""
    x = np.asarray(solution.x, dtype=float)
    y = np.asarray(solution.duals, dtype=float)
    A, b = problem.A, problem.rhs
    act = A @ x
    primal = 0.0
    dual = 0.0
    comp = 0.0
    for i, s in enumerate(problem.senses):
        r = act[i] - b[i]
        if s == LE:
            primal = max(primal, r)
            dual = max(dual, y[i])
        elif s == GE:
            primal = max(primal, -r)
            dual = max(dual, -y[i])
        else:
            primal = max(primal, abs(r))
        comp = max(comp, abs(y[i] * r))
    lo, hi = problem.lower, problem.upper
    primal = max(primal, float(np.max(lo - x, initial=0.0)), float(np.max(x - hi, initial=0.0)))
    rc = reduced_costs(problem, y)
    bound_term = 0.0
    for j in range(problem.n_vars):
        if rc[j] > 0:
            if not np.isfinite(lo[j]):
                dual = max(dual, rc[j])
                bound_term += rc[j] * x[j]
            else:
                comp = max(comp, rc[j] * abs(x[j] - lo[j]))
                bound_term += rc[j] * lo[j]
        elif rc[j] < 0:
            if not np.isfinite(hi[j]):
                dual = max(dual, -rc[j])
                bound_term += rc[j] * x[j]
            else:
                comp = max(comp, -rc[j] * abs(hi[j] - x[j]))
                bound_term += rc[j] * hi[j]
    primal_obj = float(problem.costs @ x)
    dual_obj = float(y @ b) + bound_term
    gap = abs(primal_obj - dual_obj) / (1.0 + abs(primal_obj))
    return KktReport(max(primal, 0.0), max(dual, 0.0), comp, gap)
