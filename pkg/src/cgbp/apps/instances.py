"""Instance JSON I/O and seeded generators."""
from __future__ import annotations

import json
import math
from collections import deque

import numpy as np

from .cutting_stock import CuttingStockInstance, InstanceError
from .net_path import Arc, NetPathInstance, Task


class SchemaError(InstanceError):
    pass


def _req(obj: dict, key: str, where: str, kind=int):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    v = obj[key]
    if kind is int and (not isinstance(v, int) or isinstance(v, bool)):
        raise SchemaError(f"{where}.{key}: expected integer, got {v!r}")
    if kind is float and (not isinstance(v, (int, float)) or isinstance(v, bool)):
        raise SchemaError(f"{where}.{key}: expected number, got {v!r}")
    if kind is list and not isinstance(v, list):
        raise SchemaError(f"{where}.{key}: expected list")
    return v


def instance_from_dict(d) -> CuttingStockInstance | NetPathInstance:
    if not isinstance(d, dict):
        raise SchemaError("instance: expected a JSON object")
    kind = d.get("type")
    try:
        if kind == "cutting_stock":
            items = []
            for k, it in enumerate(_req(d, "items", "instance", list)):
                where = f"items[{k}]"
                if not isinstance(it, dict):
                    raise SchemaError(f"{where}: expected an object")
                items.append((_req(it, "size", where), _req(it, "demand", where)))
            return CuttingStockInstance(_req(d, "roll_width", "instance"), tuple(items))
        if kind == "net_path":
            arcs = []
            for k, a in enumerate(_req(d, "arcs", "instance", list)):
                where = f"arcs[{k}]"
                if not isinstance(a, dict):
                    raise SchemaError(f"{where}: expected an object")
                arcs.append(Arc(_req(a, "from", where), _req(a, "to", where), float(_req(a, "cost", where, float)),
                                _req(a, "capacity", where)))
            tasks = []
            for k, t in enumerate(_req(d, "tasks", "instance", list)):
                where = f"tasks[{k}]"
                if not isinstance(t, dict):
                    raise SchemaError(f"{where}: expected an object")
                hops = t.get("max_hops")
                if hops is not None and (not isinstance(hops, int) or isinstance(hops, bool)):
                    raise SchemaError(f"{where}.max_hops: expected integer, got {hops!r}")
                tasks.append(Task(_req(t, "src", where), _req(t, "dst", where), _req(t, "demand", where), hops))
            return NetPathInstance(_req(d, "nodes", "instance"), tuple(arcs), tuple(tasks))
    except SchemaError:
        raise
    except InstanceError as exc:
        raise SchemaError(str(exc)) from None
    raise SchemaError(f"instance.type: expected 'cutting_stock' or 'net_path', got {kind!r}")


def loads_instance(text: str):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(d)


def load_instance(path):
    with open(path) as fh:
        return loads_instance(fh.read())


def dumps_instance(inst) -> str:
    return json.dumps(inst.to_dict(), indent=2, sort_keys=True) + "\n"


def save_instance(inst, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(inst))


# --------------------------------------------------------------------------
# generators


def generate_cutting_stock(seed: int, items: int | None = None, width: int | None = None,
                           max_size: int | None = None, min_size: int | None = None,
                           max_demand: int = 8) -> CuttingStockInstance:
    rng = np.random.default_rng(seed)
    W = int(width if width is not None else rng.integers(20, 41))
    n = int(items if items is not None else rng.integers(2, 7))
    hi = min(W, max_size if max_size is not None else (3 * W) // 4)
    lo = min_size if min_size is not None else math.ceil(W / 6)
    lo = max(1, min(lo, hi))
    if n < 1 or hi < 1 or max_demand < 1:
        raise InstanceError("unsatisfiable generator parameters")
    if n > hi - lo + 1:
        raise InstanceError(f"cannot draw {n} distinct sizes from [{lo}, {hi}]")
    sizes = sorted(rng.choice(np.arange(lo, hi + 1), size=n, replace=False).tolist(), reverse=True)
    demands = rng.integers(1, max_demand + 1, size=n).tolist()
    return CuttingStockInstance(W, tuple((int(s), int(d)) for s, d in zip(sizes, demands)))


def _hop_path(nodes, arcs, residual, src, dst, demand, max_hops):
    """Fewest-hop path over arcs with ``residual >= demand`` (arc indices), or None."""
    adj = [[] for _ in range(nodes)]
    for k, a in enumerate(arcs):
        if residual[k] >= demand:
            adj[a.tail].append(k)
    prev = {src: None}
    q = deque([src])
    while q:
        v = q.popleft()
        for k in adj[v]:
            h = arcs[k].head
            if h not in prev:
                prev[h] = k
                q.append(h)
    if dst not in prev:
        return None
    path = []
    v = dst
    while prev[v] is not None:
        path.append(prev[v])
        v = arcs[prev[v]].tail
    if max_hops is not None and len(path) > max_hops:
        return None
    return path[::-1]


def greedy_routable(inst: NetPathInstance) -> bool:
    """Route tasks one by one on residual capacity; success proves feasibility."""
    residual = [a.capacity for a in inst.arcs]
    for t in inst.tasks:
        path = _hop_path(inst.nodes, inst.arcs, residual, t.src, t.dst, t.demand, t.max_hops)
        if path is None:
            return False
        for k in path:
            residual[k] -= t.demand
    return True


def generate_net_path(seed: int, nodes: int | None = None, tasks: int | None = None, arcs_per_node: float = 2.0,
                      max_capacity: int = 3, max_demand: int = 2, max_cost: int = 10,
                      hop_limit: bool | None = None, retries: int = 200) -> NetPathInstance:
    """Random sparse digraph whose tasks can be routed together.

    A ring through all nodes keeps the graph strongly connected; the rest of
    the arcs are random chords. Draws that fail :func:`greedy_routable` are
    discarded.
    """
    rng = np.random.default_rng(seed)
    n = int(nodes if nodes is not None else rng.integers(5, 11))
    k = int(tasks if tasks is not None else rng.integers(2, 6))
    if n < 2 or k < 1 or max_capacity < 1 or max_demand < 1:
        raise InstanceError("unsatisfiable generator parameters")
    target = min(n * (n - 1), max(n, int(round(arcs_per_node * n))))
    use_hops = bool(rng.integers(0, 2)) if hop_limit is None else hop_limit
    for _ in range(retries):
        perm = rng.permutation(n).tolist()
        pairs = {(perm[i], perm[(i + 1) % n]) for i in range(n)}
        while len(pairs) < target:
            t, h = rng.integers(0, n, size=2).tolist()
            if t != h:
                pairs.add((t, h))
        arcs = tuple(Arc(t, h, float(rng.integers(1, max_cost + 1)), int(rng.integers(1, max_capacity + 1)))
                     for t, h in sorted(pairs))
        tlist = []
        for _ in range(k):
            s, d = rng.choice(n, size=2, replace=False).tolist()
            dem = int(rng.integers(1, max_demand + 1))
            hops = int(rng.integers(2, n)) if use_hops else None
            tlist.append(Task(int(s), int(d), dem, hops))
        inst = NetPathInstance(n, arcs, tuple(tlist))
        if greedy_routable(inst):
            return inst
    raise InstanceError(f"no routable instance after {retries} attempts")
