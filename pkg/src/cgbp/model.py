"""Block-angular compact models.

A :class:`CompactModel` is an integer (or linear) program whose rows split
into *linking* rows, which may touch any variable, and *block* rows, which
touch the variables of a single block only. Column generation prices each
block separately and handles the linking rows in the master.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .lp_core import EQ, GE, LE, RELATIONS, LpProblem

GENERIC, KNAPSACK, PATH = "generic", "knapsack", "path"
STRUCTURES = (GENERIC, KNAPSACK, PATH)


@dataclass(frozen=True)
class Variable:
    name: str
    block: int
    lower: float = 0.0
    upper: float = math.inf
    integer: bool = False


@dataclass(frozen=True)
class Row:
    """``sum(coeffs[j] * x_j) <sense> rhs``; ``block=None`` marks a linking row."""

    coeffs: tuple  # ((var index, coefficient), ...)
    sense: str
    rhs: float
    name: str = ""
    block: int | None = None

    @classmethod
    def make(cls, coeffs: dict, sense: str, rhs: float, name: str = "", block: int | None = None) -> "Row":
        if sense not in RELATIONS:
            raise ValueError(f"unknown relation {sense!r}")
        items = tuple(sorted((int(j), float(a)) for j, a in coeffs.items() if a != 0))
        return cls(items, sense, float(rhs), name, block)

    @property
    def support(self) -> list[int]:
        return [j for j, _ in self.coeffs]


@dataclass(frozen=True)
class Block:
    id: int
    name: str = ""
    structure: str = GENERIC
    # a multiplicity marks an aggregated block: ``multiplicity`` identical
    # copies priced as one, with no convexity row in the master
    multiplicity: int | None = None
    data: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def aggregated(self) -> bool:
        return self.multiplicity is not None


@dataclass(frozen=True)
class CompactModel:
    variables: tuple
    costs: tuple
    rows: tuple
    blocks: tuple
    name: str = ""

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @functools.cached_property
    def cost_vector(self) -> np.ndarray:
        return np.asarray(self.costs, dtype=float)

    @functools.cached_property
    def linking_rows(self) -> tuple:
        return tuple(r for r in self.rows if r.block is None)

    @functools.cached_property
    def _block_index(self) -> dict:
        return {b.id: b for b in self.blocks}

    def block(self, block_id: int) -> Block:
        try:
            return self._block_index[block_id]
        except KeyError:
            raise KeyError(f"unknown block id {block_id!r}") from None

    def block_rows(self, block_id: int) -> tuple:
        self.block(block_id)
        return tuple(r for r in self.rows if r.block == block_id)

    @functools.cached_property
    def _block_vars(self) -> dict:
        out = {b.id: [] for b in self.blocks}
        for j, v in enumerate(self.variables):
            out.setdefault(v.block, []).append(j)
        return {k: np.asarray(v, dtype=int) for k, v in out.items()}

    def block_vars(self, block_id: int) -> np.ndarray:
        self.block(block_id)
        return self._block_vars[block_id]

    @functools.cached_property
    def linking(self) -> tuple:
        """Dense ``(A, senses, rhs)`` of the linking rows over all variables."""
        rows = self.linking_rows
        A = np.zeros((len(rows), self.n_vars))
        for i, r in enumerate(rows):
            for j, a in r.coeffs:
                A[i, j] = a
        return A, tuple(r.sense for r in rows), np.array([r.rhs for r in rows], dtype=float)

    @functools.cached_property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    @functools.cached_property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    @functools.cached_property
    def integer(self) -> np.ndarray:
        return np.array([v.integer for v in self.variables], dtype=bool)

    @property
    def has_aggregated(self) -> bool:
        return any(b.aggregated for b in self.blocks)

    @functools.cached_property
    def integral_objective(self) -> bool:
        """True when every feasible integer point has an integer objective value."""
        c = self.cost_vector
        return bool(np.all(self.integer | (c == 0)) and np.all(np.abs(c - np.round(c)) < 1e-12))


@dataclass(frozen=True)
class BlockSubmodel:
    """One block's own constraint set, in block-local variable order.

    ``link`` carries the block's slice of the linking matrix; pricing needs
    it to turn master duals into variable prices, but its rows are not
    constraints of the block.
    """

    block: Block
    var_index: np.ndarray
    names: tuple
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    costs: np.ndarray
    A: np.ndarray
    senses: tuple
    rhs: np.ndarray
    row_names: tuple
    link: np.ndarray

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def violations(self, values, tol: float = 1e-9, bounds: dict | None = None) -> list[str]:
        """Reasons why ``values`` is not a point of this block (empty if it is)."""
        x = np.asarray(values, dtype=float)
        out = []
        if x.shape != (self.n_vars,):
            return [f"expected {self.n_vars} values, got shape {x.shape}"]
        lo, hi = self.lower, self.upper
        if bounds:
            lo, hi = lo.copy(), hi.copy()
            for j, (l, u) in bounds.items():
                lo[j] = max(lo[j], l)
                hi[j] = min(hi[j], u)
        for j in np.flatnonzero((x < lo - tol) | (x > hi + tol)):
            out.append(f"{self.names[j]}={x[j]:g} outside [{lo[j]:g}, {hi[j]:g}]")
        for j in np.flatnonzero(self.integer & (np.abs(x - np.round(x)) > tol)):
            out.append(f"{self.names[j]}={x[j]:g} not integral")
        act = self.A @ x if self.A.size else np.zeros(0)
        for i, s in enumerate(self.senses):
            r = act[i] - self.rhs[i]
            if (s == LE and r > tol) or (s == GE and r < -tol) or (s == EQ and abs(r) > tol):
                out.append(f"row {self.row_names[i]!r}: {act[i]:g} {s} {self.rhs[i]:g} violated")
        return out


@dataclass
class IntegerSolution:
    """An integer point of a compact model.

    ``x`` holds the variables of ordinary blocks; aggregated blocks report a
    multiset of block points in ``patterns`` instead.
    """

    objective: float
    x: np.ndarray
    patterns: dict = field(default_factory=dict)  # block id -> [(values tuple, count)]


def validate(model: CompactModel) -> list[str]:
    """Structural problems of ``model``; an empty list means it is block angular."""
    problems = []
    ids = [b.id for b in model.blocks]
    if len(set(ids)) != len(ids):
        problems.append(f"duplicate block ids in {ids}")
    known = set(ids)
    if len(model.costs) != model.n_vars:
        problems.append(f"{len(model.costs)} costs for {model.n_vars} variables")
    for j, v in enumerate(model.variables):
        if v.block not in known:
            problems.append(f"variable {v.name!r} belongs to unknown block {v.block!r}")
        if v.lower > v.upper:
            problems.append(f"variable {v.name!r} has lower bound above upper bound")
    for b in model.blocks:
        if b.structure not in STRUCTURES:
            problems.append(f"block {b.id} has unknown structure tag {b.structure!r}")
        if b.aggregated and b.multiplicity < 1:
            problems.append(f"block {b.id} has multiplicity {b.multiplicity}")
        if not np.any([v.block == b.id for v in model.variables]):
            problems.append(f"block {b.id} owns no variables")
    for i, r in enumerate(model.rows):
        label = r.name or f"#{i}"
        bad = [j for j in r.support if not 0 <= j < model.n_vars]
        if bad:
            problems.append(f"row {label!r} references unknown variables {bad}")
            continue
        if r.block is None:
            continue
        if r.block not in known:
            problems.append(f"row {label!r} declared for unknown block {r.block!r}")
            continue
        spans = sorted({model.variables[j].block for j in r.support})
        if any(bk != r.block for bk in spans):
            problems.append(f"block row {label!r} of block {r.block} spans blocks {spans}")
    return problems


def block_submodel(model: CompactModel, block_id) -> BlockSubmodel:
    blk = model.block(block_id)
    idx = model.block_vars(block_id)
    pos = {int(j): k for k, j in enumerate(idx)}
    rows = model.block_rows(block_id)
    A = np.zeros((len(rows), len(idx)))
    for i, r in enumerate(rows):
        for j, a in r.coeffs:
            A[i, pos[j]] = a
    link_A = model.linking[0]
    return BlockSubmodel(
        block=blk,
        var_index=idx,
        names=tuple(model.variables[j].name for j in idx),
        lower=model.lower[idx],
        upper=model.upper[idx],
        integer=model.integer[idx],
        costs=model.cost_vector[idx],
        A=A,
        senses=tuple(r.sense for r in rows),
        rhs=np.array([r.rhs for r in rows], dtype=float),
        row_names=tuple(r.name for r in rows),
        link=link_A[:, idx],
    )


def lp_relaxation(model: CompactModel) -> LpProblem:
    """The compact LP: same rows and costs, integrality dropped.

    Aggregated blocks are expanded into their ``multiplicity`` copies so the
    relaxation is that of the full compact formulation.
    """
    copies = {b.id: (b.multiplicity if b.aggregated else 1) for b in model.blocks}
    # column map: (original var, copy) -> LP column
    cols = []
    for j, v in enumerate(model.variables):
        for k in range(copies[v.block]):
            cols.append((j, k))
    colpos = {c: i for i, c in enumerate(cols)}
    n = len(cols)
    costs = np.array([model.costs[j] for j, _ in cols], dtype=float)
    lower = np.array([model.variables[j].lower for j, _ in cols], dtype=float)
    upper = np.array([model.variables[j].upper for j, _ in cols], dtype=float)
    A_rows, senses, rhs = [], [], []
    for r in model.rows:
        if r.block is None:
            row = np.zeros(n)
            for j, a in r.coeffs:
                for k in range(copies[model.variables[j].block]):
                    row[colpos[(j, k)]] = a
            A_rows.append(row)
            senses.append(r.sense)
            rhs.append(r.rhs)
        else:
            for k in range(copies[r.block]):
                row = np.zeros(n)
                for j, a in r.coeffs:
                    row[colpos[(j, k)]] = a
                A_rows.append(row)
                senses.append(r.sense)
                rhs.append(r.rhs)
    A = np.array(A_rows) if A_rows else np.zeros((0, n))
    return LpProblem(costs, A, tuple(senses), rhs, lower, upper)


def verify_solution(model: CompactModel, sol: IntegerSolution, tol: float = 1e-6) -> list[str]:
    """Check an integer solution against every row of the compact model."""
    problems = []
    x = np.asarray(sol.x, dtype=float)
    if x.shape != (model.n_vars,):
        return [f"solution vector has shape {x.shape}, expected ({model.n_vars},)"]
    activity = np.zeros(len(model.linking_rows))
    link_A, senses, rhs = model.linking
    objective = 0.0
    for blk in model.blocks:
        sub = block_submodel(model, blk.id)
        if blk.aggregated:
            patterns = sol.patterns.get(blk.id, [])
            used = 0
            for values, count in patterns:
                if count < 0 or count != int(count):
                    problems.append(f"block {blk.id}: pattern count {count} is not a nonnegative integer")
                for msg in sub.violations(values, tol):
                    problems.append(f"block {blk.id} pattern {values}: {msg}")
                vals = np.asarray(values, dtype=float)
                activity += count * (sub.link @ vals)
                objective += count * float(sub.costs @ vals)
                used += count
            if used > blk.multiplicity:
                problems.append(f"block {blk.id} uses {used} copies, multiplicity is {blk.multiplicity}")
        else:
            vals = x[sub.var_index]
            for msg in sub.violations(vals, tol):
                problems.append(f"block {blk.id}: {msg}")
            activity += sub.link @ vals
            objective += float(sub.costs @ vals)
    for i, s in enumerate(senses):
        r = activity[i] - rhs[i]
        if (s == LE and r > tol) or (s == GE and r < -tol) or (s == EQ and abs(r) > tol):
            name = model.linking_rows[i].name or f"#{i}"
            problems.append(f"linking row {name!r}: {activity[i]:g} {s} {rhs[i]:g} violated")
    if abs(objective - sol.objective) > tol * (1 + abs(objective)):
        problems.append(f"reported objective {sol.objective:g} differs from recomputed {objective:g}")
    return problems
