"""Brute-force reference computations used by the tests.

Nothing here imports the solvers under test; every oracle works from the raw
edge list so agreement is an independent check.
"""
from __future__ import annotations

import itertools
import math
from collections import deque


def adjacency(n, edges):
    adj = {u: {} for u in range(n)}
    for u, v, w in edges:
        if v not in adj[u] or w < adj[u][v]:
            adj[u][v] = adj[v][u] = w
    return adj


def reachable(n, edges, source=0):
    adj = adjacency(n, edges)
    seen = {source}
    todo = deque([source])
    while todo:
        u = todo.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def simple_path_costs(n, edges):
    """Cheapest simple path between every pair, by exhaustive enumeration."""
    adj = adjacency(n, edges)
    best = [[math.inf] * n for _ in range(n)]

    def walk(src, u, cost, seen):
        if cost < best[src][u]:
            best[src][u] = cost
        for v, w in adj[u].items():
            if v not in seen:
                seen.add(v)
                walk(src, v, cost + w, seen)
                seen.remove(v)

    for src in range(n):
        walk(src, src, 0, {src})
    return best


def floyd_warshall(n, edges):
    d = [[0 if i == j else math.inf for j in range(n)] for i in range(n)]
    for u, v, w in edges:
        d[u][v] = d[v][u] = min(d[u][v], w)
    for k in range(n):
        dk = d[k]
        for i in range(n):
            dik = d[i][k]
            di = d[i]
            for j in range(n):
                if dik + dk[j] < di[j]:
                    di[j] = dik + dk[j]
    return d


def order_cost(d, start, order, dest):
    stops = [start, *order, dest]
    return sum(d[a][b] for a, b in zip(stops, stops[1:]))


def best_orders(d, start, dest, mandatory):
    """Optimal cost and every optimal visiting order, by permutation enumeration."""
    best, winners = math.inf, []
    for order in itertools.permutations(sorted(mandatory)):
        c = order_cost(d, start, order, dest)
        if c < best:
            best, winners = c, [order]
        elif c == best:
            winners.append(order)
    return best, winners


def optimal_cost(d, start, dest, mandatory):
    return best_orders(d, start, dest, mandatory)[0]


def optimal_first_nodes(d, start, dest, mandatory):
    """Mandatory nodes that some optimal solution visits first."""
    cost, winners = best_orders(d, start, dest, mandatory)
    return cost, {o[0] for o in winners if o}


def spanning_tree_weights(d, nodes):
    """Weights of every spanning tree of the complete graph on ``nodes``."""
    nodes = sorted(nodes)
    if len(nodes) <= 1:
        return [0]
    pairs = list(itertools.combinations(nodes, 2))
    out = []
    for chosen in itertools.combinations(pairs, len(nodes) - 1):
        parent = {x: x for x in nodes}

        def find(x):
            while parent[x] != x:
                x = parent[x]
            return x

        ok = True
        for a, b in chosen:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            out.append(sum(d[a][b] for a, b in chosen))
    return out
