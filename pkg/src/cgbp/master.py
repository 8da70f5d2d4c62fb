"""The restricted master problem.

Columns are block points; the master picks a combination of them that
satisfies the linking rows. Ordinary blocks get a convexity row (weights of
the block's columns sum to one); aggregated blocks get none and their
weights are plain nonnegative counts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .lp_core import EQ, GE, LE, LpConfig, LpProblem, LpSolution, LpStatus, solve_lp
from .model import BlockSubmodel, CompactModel, block_submodel

log = logging.getLogger(__name__)

TOL_INT = 1e-6
TOL_FEAS = 1e-9


class LrmpError(RuntimeError):
    """The LRMP could not be solved to optimality."""


def fingerprint(block_id, values) -> tuple:
    vals = np.round(np.asarray(values, dtype=float), 6) + 0.0
    return (block_id, tuple(vals.tolist()))


@dataclass(eq=False)
class Column:
    block_id: int | None
    cost: float
    linking_coeffs: np.ndarray
    original_values: np.ndarray
    is_artificial: bool = False
    label: str = ""
    fingerprint: tuple = field(default=None)

    def __post_init__(self):
        if self.fingerprint is None:
            if self.is_artificial:
                self.fingerprint = ("artificial", self.label)
            else:
                self.fingerprint = fingerprint(self.block_id, self.original_values)

    def __repr__(self):
        if self.is_artificial:
            return f"Column(artificial {self.label!r}, cost={self.cost:g})"
        vals = ",".join(f"{v:g}" for v in self.original_values)
        return f"Column(block={self.block_id}, cost={self.cost:g}, x=({vals}))"


def make_column(model: CompactModel, block_id, values, sub: BlockSubmodel | None = None) -> Column:
    sub = sub or block_submodel(model, block_id)
    vals = np.asarray(values, dtype=float)
    return Column(block_id, float(sub.costs @ vals), sub.link @ vals, vals)


@dataclass(frozen=True)
class SetRow:
    """Branching row of an aggregated block: ``sum(weights of columns in box) <sense> rhs``.

    ``box`` is ``((local var, lo, hi), ...)``; a column is in the box when
    every listed variable lies within its range.
    """

    block_id: int
    box: tuple
    sense: str
    rhs: float

    def contains(self, values) -> bool:
        return all(lo - TOL_INT <= values[j] <= hi + TOL_INT for j, lo, hi in self.box)

    def describe(self) -> str:
        parts = [f"x{j} in [{lo:g},{hi:g}]" for j, lo, hi in self.box]
        return f"#cols(block {self.block_id}: {' & '.join(parts)}) {self.sense} {self.rhs:g}"


@dataclass
class DualPrices:
    pi: np.ndarray  # one per linking row
    sigma: dict  # block id -> convexity dual (ordinary blocks only)
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))  # one per set row


@dataclass
class LrmpSolution:
    weights: np.ndarray
    artificial_weights: np.ndarray
    duals: DualPrices
    objective: float
    lp: LpSolution

    @property
    def artificial_active(self) -> bool:
        return bool(np.any(self.artificial_weights > TOL_INT))


@dataclass
class Recovered:
    x: np.ndarray  # ordinary-block variables
    patterns: dict  # aggregated block id -> [(values tuple, weight)]
    artificial_active: bool


def default_big_m(model: CompactModel) -> float:
    cmax = float(np.max(np.abs(model.cost_vector), initial=0.0))
    return 1e4 * (1.0 + cmax) * max(1, len(model.linking_rows))


class RmpState:
    """Column pool plus everything needed to assemble and solve the LRMP.

    ``bounds`` maps global variable index to ``(lo, hi)`` restrictions from
    branching; ``set_rows`` are extra rows over aggregated blocks.
    """

    def __init__(self, model: CompactModel, big_m: float | None = None, bounds: dict | None = None,
                 set_rows=(), lp_config: LpConfig | None = None):
        self.model = model
        self.big_m = default_big_m(model) if big_m is None else float(big_m)
        self.bounds = dict(bounds or {})
        self.set_rows = tuple(set_rows)
        self.lp_config = lp_config or LpConfig()
        self.subs = {b.id: block_submodel(model, b.id) for b in model.blocks}
        self.convexity_blocks = [b.id for b in model.blocks if not b.aggregated]
        self.columns: list[Column] = []
        self.artificials: list[Column] = []
        self._seen: set = set()
        self.last: LrmpSolution | None = None
        self._basis = None
        self._make_artificials()

    # ------------------------------------------------------------ plumbing
    @property
    def n_link(self) -> int:
        return len(self.model.linking_rows)

    def local_bounds(self, block_id) -> dict:
        sub = self.subs[block_id]
        pos = {int(j): k for k, j in enumerate(sub.var_index)}
        return {pos[j]: b for j, b in self.bounds.items() if j in pos}

    def _make_artificials(self):
        L = self.n_link
        _, senses, rhs = self.model.linking
        for i, s in enumerate(senses):
            coeffs = np.zeros(L)
            if s == GE:
                coeffs[i] = 1.0
            elif s == LE:
                coeffs[i] = -1.0
            else:
                coeffs[i] = 1.0 if rhs[i] >= 0 else -1.0
            self.artificials.append(Column(None, self.big_m, coeffs, np.zeros(0), True, f"link{i}"))
        for bid in self.convexity_blocks:
            self.artificials.append(Column(bid, self.big_m, np.zeros(L), np.zeros(0), True, f"convexity{bid}"))
        for k, row in enumerate(self.set_rows):
            self.artificials.append(Column(row.block_id, self.big_m, np.zeros(L), np.zeros(0), True, f"set{k}"))

    def admissible(self, col: Column) -> list[str]:
        sub = self.subs.get(col.block_id)
        if sub is None:
            return [f"unknown block {col.block_id!r}"]
        return sub.violations(col.original_values, TOL_FEAS, self.local_bounds(col.block_id))

    def block_columns(self, block_id) -> list[Column]:
        return [c for c in self.columns if c.block_id == block_id]

    # ---------------------------------------------------------- assembly
    def _lp_columns(self) -> list[Column]:
        return self.artificials + self.columns

    def assemble(self) -> LpProblem:
        cols = self._lp_columns()
        L = self.n_link
        conv_pos = {bid: L + k for k, bid in enumerate(self.convexity_blocks)}
        n_conv = len(self.convexity_blocks)
        m = L + n_conv + len(self.set_rows)
        A = np.zeros((m, len(cols)))
        for j, c in enumerate(cols):
            A[:L, j] = c.linking_coeffs
            if c.is_artificial:
                if c.label.startswith("convexity"):
                    A[conv_pos[c.block_id], j] = 1.0
                elif c.label.startswith("set"):
                    k = int(c.label[3:])
                    A[L + n_conv + k, j] = 1.0 if self.set_rows[k].sense == GE else -1.0
                continue
            if c.block_id in conv_pos:
                A[conv_pos[c.block_id], j] = 1.0
            for k, row in enumerate(self.set_rows):
                if row.block_id == c.block_id and row.contains(c.original_values):
                    A[L + n_conv + k, j] = 1.0
        _, senses, rhs = self.model.linking
        senses = tuple(senses) + (EQ,) * n_conv + tuple(r.sense for r in self.set_rows)
        b = np.concatenate([rhs, np.ones(n_conv), [r.rhs for r in self.set_rows]])
        costs = np.array([c.cost for c in cols], dtype=float)
        return LpProblem(costs, A, senses, b)


def init_rmp(model: CompactModel, initial_columns=(), big_m: float | None = None, bounds: dict | None = None,
             set_rows=(), lp_config: LpConfig | None = None) -> RmpState:
    """Fresh restricted master seeded with ``initial_columns``.

    Artificial columns (cost ``big_m``) cover every linking, convexity and
    set row, so the first LRMP is always feasible.
    """
    rmp = RmpState(model, big_m, bounds, set_rows, lp_config)
    add_columns(rmp, initial_columns)
    return rmp


def add_columns(rmp: RmpState, columns) -> int:
    added = 0
    for col in columns:
        if col.is_artificial:
            continue
        if col.fingerprint in rmp._seen:
            continue
        problems = rmp.admissible(col)
        if problems:
            log.info("rejected column %r: %s", col, "; ".join(problems))
            continue
        sub = rmp.subs[col.block_id]
        expected = sub.link @ col.original_values
        if not np.allclose(expected, col.linking_coeffs, atol=1e-9):
            log.info("rejected column %r: linking coefficients do not match its point", col)
            continue
        rmp.columns.append(col)
        rmp._seen.add(col.fingerprint)
        added += 1
    return added


def _basis_keys(rmp: RmpState, sol: LpSolution):
    cols = rmp._lp_columns()
    keys = []
    for kind, idx in sol.basis:
        if kind == "x":
            keys.append(("col", cols[idx].fingerprint))
        elif kind == "s":
            keys.append(("row", idx))
        else:
            return None
    upper = [cols[j].fingerprint for j in sol.at_upper]
    return keys, upper


def _warm_basis(rmp: RmpState):
    if rmp._basis is None:
        return None, ()
    keys, upper = rmp._basis
    pos = {c.fingerprint: j for j, c in enumerate(rmp._lp_columns())}
    tags = []
    for kind, k in keys:
        if kind == "row":
            tags.append(("s", k))
        elif k in pos:
            tags.append(("x", pos[k]))
        else:
            return None, ()
    return tags, [pos[k] for k in upper if k in pos]


def solve_lrmp(rmp: RmpState) -> LrmpSolution:
    problem = rmp.assemble()
    tags, upper = _warm_basis(rmp)
    sol = solve_lp(problem, rmp.lp_config, warm_basis=tags, at_upper=upper)
    if sol.status is not LpStatus.OPTIMAL:
        raise LrmpError(f"LRMP solve ended with status {sol.status.value}")
    rmp._basis = _basis_keys(rmp, sol)
    n_art = len(rmp.artificials)
    L = rmp.n_link
    n_conv = len(rmp.convexity_blocks)
    y = sol.duals
    duals = DualPrices(
        pi=y[:L].copy(),
        sigma={bid: float(y[L + k]) for k, bid in enumerate(rmp.convexity_blocks)},
        mu=y[L + n_conv:].copy(),
    )
    out = LrmpSolution(sol.x[n_art:].copy(), sol.x[:n_art].copy(), duals, sol.objective, sol)
    rmp.last = out
    return out


def column_reduced_cost(rmp: RmpState, col: Column, duals: DualPrices) -> float:
    rc = col.cost - float(duals.pi @ col.linking_coeffs)
    if col.block_id in duals.sigma:
        rc -= duals.sigma[col.block_id]
    for k, row in enumerate(rmp.set_rows):
        if row.block_id == col.block_id and row.contains(col.original_values):
            rc -= float(duals.mu[k])
    return rc


def recover_original_solution(rmp: RmpState, weights) -> Recovered:
    """Map master weights back to original variables.

    Ordinary blocks get ``x = sum(weight * point)``; aggregated blocks get the
    weighted list of their points. ``artificial_active`` flags that the
    recovered point is not feasible for the original problem.
    """
    model = rmp.model
    w = np.asarray(weights, dtype=float)
    x = np.zeros(model.n_vars)
    patterns: dict = {}
    for col, wt in zip(rmp.columns, w):
        if wt <= TOL_FEAS:
            continue
        sub = rmp.subs[col.block_id]
        if sub.block.aggregated:
            patterns.setdefault(col.block_id, []).append((tuple(col.original_values.tolist()), float(wt)))
        else:
            x[sub.var_index] += wt * col.original_values
    active = rmp.last is not None and rmp.last.artificial_active
    return Recovered(x, patterns, active)


def select_fractional(rmp: RmpState, weights):
    """Most fractional integer variable of the recovered point, or None.

    Only ordinary blocks are inspected; ties go to the lowest variable index.
    Returns ``(block id, global variable index, value)``.
    """
    rec = recover_original_solution(rmp, weights)
    model = rmp.model
    best = None
    best_score = None
    for blk in model.blocks:
        if blk.aggregated:
            continue
        for j in model.block_vars(blk.id):
            if not model.integer[j]:
                continue
            v = rec.x[j]
            frac = v - np.floor(v)
            if min(frac, 1 - frac) <= TOL_INT:
                continue
            score = abs(frac - 0.5)
            if best is None or score < best_score - 1e-12 or (abs(score - best_score) <= 1e-12 and j < best[1]):
                best, best_score = (blk.id, int(j), float(v)), score
    return best
