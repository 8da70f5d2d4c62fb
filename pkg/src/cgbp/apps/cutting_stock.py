"""Cutting stock as an aggregated knapsack block.

One block describes a single roll: ``y`` says whether the roll is cut and
``a_i`` how many pieces of item ``i`` it yields. All rolls are identical, so
the master keeps one block with multiplicity ``sum(demands)`` and counts
patterns instead of assigning them to rolls.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lp_core import GE, LE
from ..master import Column, make_column
from ..model import KNAPSACK, Block, CompactModel, Row, Variable


class InstanceError(ValueError):
    pass


@dataclass(frozen=True)
class CuttingStockInstance:
    roll_width: int
    items: tuple  # ((size, demand), ...)

    def __post_init__(self):
        if not _is_int(self.roll_width) or self.roll_width <= 0:
            raise InstanceError("roll_width must be a positive integer")
        if not self.items:
            raise InstanceError("at least one item is required")
        for k, (size, demand) in enumerate(self.items):
            if not _is_int(size) or not 0 < size <= self.roll_width:
                raise InstanceError(f"items[{k}].size must be an integer in [1, roll_width]")
            if not _is_int(demand) or demand < 1:
                raise InstanceError(f"items[{k}].demand must be a positive integer")

    @property
    def sizes(self) -> list[int]:
        return [int(s) for s, _ in self.items]

    @property
    def demands(self) -> list[int]:
        return [int(d) for _, d in self.items]

    def volume_bound(self) -> float:
        return sum(s * d for s, d in self.items) / self.roll_width

    def to_dict(self) -> dict:
        return {"type": "cutting_stock", "roll_width": int(self.roll_width),
                "items": [{"size": int(s), "demand": int(d)} for s, d in self.items]}


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def build_cutting_stock(inst: CuttingStockInstance) -> CompactModel:
    W = inst.roll_width
    sizes, demands = inst.sizes, inst.demands
    n = len(sizes)
    variables = [Variable("y", 0, 0, 1, True)]
    for i, (s, d) in enumerate(zip(sizes, demands)):
        variables.append(Variable(f"a{i}", 0, 0, min(d, W // s), True))
    costs = [1.0] + [0.0] * n
    rows = [Row.make({0: -W, **{i + 1: s for i, s in enumerate(sizes)}}, LE, 0, "width", block=0)]
    for i, d in enumerate(demands):
        rows.append(Row.make({i + 1: 1}, GE, d, f"demand{i}"))
    data = {"sizes": sizes, "capacity": W, "use_var": 0, "item_vars": list(range(1, n + 1))}
    block = Block(0, "roll", KNAPSACK, multiplicity=sum(demands), data=data)
    return CompactModel(tuple(variables), tuple(costs), tuple(rows), (block,), "cutting_stock")


def warm_start(model: CompactModel, inst: CuttingStockInstance) -> list[Column]:
    """One piece of a single item per roll."""
    cols = []
    for i in range(len(inst.items)):
        x = np.zeros(len(inst.items) + 1)
        x[0] = 1
        x[i + 1] = 1
        cols.append(make_column(model, 0, x))
    return cols


def roll_patterns(sol, inst: CuttingStockInstance) -> list[tuple]:
    """``[(pieces per item, count)]`` of the rolls actually cut."""
    out = []
    for values, count in sol.patterns.get(0, []):
        if values[0] > 0.5 and count > 0:
            out.append((tuple(int(round(v)) for v in values[1:]), int(count)))
    return out
