"""Exact solvers over the mandatory search tree.

The tree's root is ``start``, every internal node is a mandatory node and every
leaf is ``dest``; a root-to-leaf path is a visiting order of M whose cost is the
sum of metric-closure costs along it.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .domain import SearchTimeout
from .graph_core import reconstruct_path

_CHECK_EVERY = 4096


@dataclass(frozen=True)
class TreeNode:
    current: int
    remaining: frozenset
    g: float


@dataclass
class SearchStats:
    node_visits: int = 0
    cuts: int = 0
    incumbent_trace: list = field(default_factory=list)  # (node_visits, cost)
    elapsed: float = 0.0
    # (root child, visits inside its subtree, incumbent after the subtree)
    root_children: list = field(default_factory=list)


def min1_min2(x, nodes, t):
    """Two smallest metric costs from ``x`` to the other members of ``nodes``."""
    others = sorted(t.rows[x][y] for y in set(nodes) - {x})
    if len(others) < 2:
        raise ValueError(f"min2 undefined: fewer than two nodes besides {x}")
    return others[0], others[1]


def pi_heuristic(v, remaining, dest, t):
    """Half-sum lower bound on the cost of finishing from ``v`` through ``remaining`` to ``dest``."""
    rows = t.rows
    d = set(remaining) | {v, dest}

    def cheapest(x):
        return sorted(rows[x][y] for y in d - {x})

    if len(d) == 1:
        return 0.0
    total = cheapest(v)[0] + cheapest(dest)[0]
    for r in remaining:
        c = cheapest(r)
        # v == dest with a single r: both of r's tour edges lead back to v
        total += c[0] + (c[1] if len(c) > 1 else c[0])
    return total / 2


def order_to_path(s, order, t):
    order = list(order)
    if sorted(order) != sorted(s.mandatory) or len(set(order)) != len(order):
        raise ValueError(f"order {order} is not a permutation of {sorted(s.mandatory)}")
    stops = [s.start, *order, s.dest]
    path = [s.start]
    cost = 0.0
    for a, b in zip(stops, stops[1:]):
        path += reconstruct_path(t, a, b)[1:]
        cost += t.rows[a][b]
    return path, cost


def order_cost(s, order, t):
    rows = t.rows
    stops = [s.start, *order, s.dest]
    return sum(rows[a][b] for a, b in zip(stops, stops[1:]))


class _PiBound:
    """pi over local indices: mandatory nodes are 0..q-1, dest is q.

    Each node keeps its metric neighbours sorted by cost, so min1/min2 over the
    live set D is a short scan filtered by a bitmask.
    """

    def __init__(self, nodes, dest, rows):
        self.q = len(nodes)
        allnodes = list(nodes) + [dest]
        self.near = []
        for i, x in enumerate(allnodes):
            lst = sorted((rows[x][y], j) for j, y in enumerate(allnodes) if j != i)
            self.near.append([(c, 1 << j) for c, j in lst])

    def __call__(self, v, rmask):
        near = self.near
        q = self.q
        dmask = rmask | (1 << v) | (1 << q)
        total = 0.0
        for c, b in near[v]:
            if dmask & b:
                total += c
                break
        for c, b in near[q]:
            if dmask & b:
                total += c
                break
        r = rmask
        while r:
            low = r & -r
            r ^= low
            seen = 0
            for c, b in near[low.bit_length() - 1]:
                if dmask & b:
                    total += c
                    seen += 1
                    if seen == 2:
                        break
        return total / 2


CHILD_ORDERS = ("index", "nearest")


def dfs_branch_and_bound(s, t, initial_ub=None, timeout=None, child_order="index"):
    """Depth-first B&B with the pi lower bound.

    ``initial_ub`` is an optional ``(cost, order)`` incumbent. Children are tried
    by ascending node index, or with ``child_order="nearest"`` by ascending
    metric cost from the current node (ties by index). A child is cut when
    ``g + pi >= incumbent``. Returns ``(order, cost, stats)``.
    """
    if child_order not in CHILD_ORDERS:
        raise ValueError(f"child_order must be one of {CHILD_ORDERS}")
    t0 = time.perf_counter()
    deadline = None if timeout is None else t0 + timeout
    rows = t.rows
    nodes = sorted(s.mandatory)
    q = len(nodes)
    dest = s.dest
    pi = _PiBound(nodes, dest, rows)
    if child_order == "nearest":
        children = [sorted(range(q), key=lambda j: (rows[x][nodes[j]], nodes[j])) for x in nodes]
        root_order = sorted(range(q), key=lambda j: (rows[s.start][nodes[j]], nodes[j]))
    else:
        children = [range(q)] * q  # nodes are sorted, so local order is index order
        root_order = range(q)
    to_dest = [rows[x][dest] for x in nodes]

    stats = SearchStats()
    best_cost = math.inf
    best_order = None
    if initial_ub is not None:
        best_cost, best_order = float(initial_ub[0]), tuple(initial_ub[1])
        stats.incumbent_trace.append((0, best_cost))

    if q == 0:
        total = rows[s.start][dest]
        if total < best_cost:
            stats.node_visits = 1
            best_cost, best_order = total, ()
            stats.incumbent_trace.append((1, total))
        else:
            stats.cuts = 1
        stats.elapsed = time.perf_counter() - t0
        return best_order, best_cost, stats

    prefix = []

    def expand(local, rmask, g, row):
        nonlocal best_cost, best_order
        for j in children[local]:
            bit = 1 << j
            if not rmask & bit:
                continue
            gc = g + row[nodes[j]]
            rest = rmask ^ bit
            lb = gc + (to_dest[j] if not rest else pi(j, rest))
            if lb >= best_cost:
                stats.cuts += 1
                continue
            stats.node_visits += 1
            if deadline is not None and not stats.node_visits % _CHECK_EVERY:
                if time.perf_counter() > deadline:
                    raise SearchTimeout(f"branch and bound exceeded {timeout}s")
            prefix.append(nodes[j])
            if not rest:
                stats.node_visits += 1  # leaf completion
                best_cost = gc + to_dest[j]
                best_order = tuple(prefix)
                stats.incumbent_trace.append((stats.node_visits, best_cost))
            else:
                expand(j, rest, gc, rows[nodes[j]])
            prefix.pop()

    full = (1 << q) - 1
    start_row = rows[s.start]
    for j in root_order:
        before = stats.node_visits
        gc = start_row[nodes[j]]
        rest = full ^ (1 << j)
        lb = gc + (to_dest[j] if not rest else pi(j, rest))
        if lb >= best_cost:
            stats.cuts += 1
        else:
            stats.node_visits += 1
            prefix.append(nodes[j])
            if not rest:
                stats.node_visits += 1
                best_cost = gc + to_dest[j]
                best_order = tuple(prefix)
                stats.incumbent_trace.append((stats.node_visits, best_cost))
            else:
                expand(j, rest, gc, rows[nodes[j]])
            prefix.pop()
        stats.root_children.append((nodes[j], stats.node_visits - before, best_cost))
    stats.elapsed = time.perf_counter() - t0
    return best_order, best_cost, stats


def dp_solve(s, t, max_mandatory=20, timeout=None):
    """Held-Karp over (visited subset of M, last mandatory node).

    Returns ``(order, cost, visits)`` where ``visits`` counts the
    (subset, last) states evaluated.
    """
    q = len(s.mandatory)
    if q > max_mandatory:
        raise ValueError(f"{q} mandatory nodes exceeds the DP cap of {max_mandatory}")
    rows = t.rows
    if q == 0:
        return (), rows[s.start][s.dest], 0
    t0 = time.perf_counter()
    nodes = sorted(s.mandatory)
    c = [[rows[a][b] for b in nodes] for a in nodes]
    size = 1 << q
    best = [None] * size  # best[mask][j]: cheapest start -> ... -> nodes[j] covering mask
    back = [None] * size
    visits = 0
    for mask in range(1, size):
        members = [j for j in range(q) if mask >> j & 1]
        row_best = [math.inf] * q
        row_back = [-1] * q
        for j in members:
            prev = mask ^ (1 << j)
            visits += 1
            if not prev:
                row_best[j] = rows[s.start][nodes[j]]
                continue
            pb = best[prev]
            bv, bi = math.inf, -1
            for i in members:
                if i != j:
                    v = pb[i] + c[i][j]
                    if v < bv:
                        bv, bi = v, i
            row_best[j], row_back[j] = bv, bi
        best[mask], back[mask] = row_best, row_back
        if timeout is not None and not mask % 1024 and time.perf_counter() - t0 > timeout:
            raise SearchTimeout(f"DP exceeded {timeout}s")
    full = size - 1
    final = [best[full][j] + rows[nodes[j]][s.dest] for j in range(q)]
    j = min(range(q), key=lambda k: (final[k], k))
    cost = final[j]
    order = []
    mask = full
    while j != -1:
        order.append(nodes[j])
        j, mask = back[mask][j], mask ^ (1 << j)
    return tuple(reversed(order)), cost, visits
