"""Weighted undirected graphs, their metric closure and subset MSTs."""
from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed or invalid graph files."""


@dataclass(frozen=True)
class WeightedGraph:
    node_count: int
    edges: tuple  # ((u, v, w), ...) with u < v
    adjacency: tuple = field(repr=False, compare=False, default=())

    def __post_init__(self):
        if self.node_count < 1:
            raise GraphFormatError("graph needs at least one node")
        collapsed = {}
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < self.node_count and 0 <= v < self.node_count):
                raise GraphFormatError(f"edge ({u},{v}) references a missing node")
            if u == v:
                raise GraphFormatError(f"self-loop on node {u}")
            if not w > 0:
                raise GraphFormatError("nonpositive weight")
            key = (min(u, v), max(u, v))
            collapsed[key] = min(w, collapsed.get(key, w))
        edges = tuple((u, v, w) for (u, v), w in sorted(collapsed.items()))
        adj = [[] for _ in range(self.node_count)]
        for u, v, w in edges:
            adj[u].append((v, w))
            adj[v].append((u, w))
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        if not _is_connected(self):
            raise GraphFormatError("disconnected graph")

    def neighbors(self, u):
        return self.adjacency[u]

    def weight(self, u, v):
        for x, w in self.adjacency[u]:
            if x == v:
                return w
        raise KeyError(f"no edge ({u},{v})")

    def adjacency_matrix(self):
        """Binary (0/1) adjacency matrix."""
        a = np.zeros((self.node_count, self.node_count))
        for u, v, _ in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a


def _is_connected(g):
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v, _ in g.adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.node_count


def load_graph(text):
    """Parse the ``n m`` / ``u v w`` text format into a validated graph."""
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        rows.append((lineno, line.split()))
    if not rows:
        raise GraphFormatError("line 1: missing header 'n m'")
    lineno, head = rows[0]
    try:
        n, m = (int(x) for x in head)
    except ValueError:
        raise GraphFormatError(f"line {lineno}: expected header 'n m', got {' '.join(head)!r}") from None
    if len(rows) - 1 != m:
        raise GraphFormatError(f"line {lineno}: header announces {m} edges, found {len(rows) - 1}")
    edges = []
    for lineno, parts in rows[1:]:
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
            if len(parts) != 3:
                raise IndexError
        except (ValueError, IndexError):
            raise GraphFormatError(f"line {lineno}: expected 'u v w', got {' '.join(parts)!r}") from None
        if not w > 0:
            raise GraphFormatError(f"line {lineno}: nonpositive weight")
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"line {lineno}: node index out of range")
        edges.append((u, v, w))
    return WeightedGraph(n, tuple(edges))


def dump_graph(g):
    lines = [f"{g.node_count} {len(g.edges)}"]
    lines += [f"{u} {v} {w:.17g}" for u, v, w in g.edges]
    return "\n".join(lines) + "\n"


def random_connected_graph(n, avg_degree=3.0, seed=0, weight_range=(1, 100)):
    """Random spanning tree plus extra edges; integer weights in ``weight_range``.

    The number of edges is ``round(avg_degree * n / 2)`` clamped to
    ``[n - 1, n (n - 1) / 2]``.
    """
    rng = random.Random(seed)
    lo, hi = weight_range
    order = list(range(n))
    rng.shuffle(order)
    pairs = set()
    for i in range(1, n):
        u, v = order[i], order[rng.randrange(i)]
        pairs.add((min(u, v), max(u, v)))
    target = min(max(round(avg_degree * n / 2), n - 1), n * (n - 1) // 2)
    candidates = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in pairs]
    rng.shuffle(candidates)
    pairs.update(candidates[: target - len(pairs)])
    edges = tuple((u, v, float(rng.randint(lo, hi))) for u, v in sorted(pairs))
    return WeightedGraph(n, edges)


@dataclass(frozen=True)
class ShortestPathTable:
    cost: np.ndarray  # (n, n)
    next_hop: np.ndarray  # (n, n) int, next node on a shortest i -> j path

    @property
    def node_count(self):
        return self.cost.shape[0]

    @cached_property
    def rows(self):
        """Cost matrix as nested lists, for scalar-heavy inner loops."""
        return self.cost.tolist()


def _dijkstra(g, source):
    n = g.node_count
    dist = [float("inf")] * n
    parent = [-1] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in g.adjacency[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, parent


def all_pairs_shortest_paths(g):
    """One Dijkstra run per source node."""
    n = g.node_count
    cost = np.zeros((n, n))
    next_hop = np.full((n, n), -1, dtype=np.int64)
    for j in range(n):
        # tree rooted at j: parent[i] is the next hop from i toward j
        dist, parent = _dijkstra(g, j)
        cost[:, j] = dist
        next_hop[:, j] = parent
        next_hop[j, j] = j
    cost = np.minimum(cost, cost.T)  # exact already; enforce bitwise symmetry
    cost.setflags(write=False)
    next_hop.setflags(write=False)
    return ShortestPathTable(cost, next_hop)


def reconstruct_path(t, i, j):
    path = [i]
    while path[-1] != j:
        path.append(int(t.next_hop[path[-1], j]))
    return path


def path_cost(g, path):
    return sum(g.weight(u, v) for u, v in zip(path, path[1:]))


def mst_weight(t, nodes):
    """Prim's MST weight over ``nodes`` in the metric closure."""
    nodes = sorted(nodes)
    if len(nodes) <= 1:
        return 0.0
    rows = t.rows
    first = rows[nodes[0]]
    best = {v: first[v] for v in nodes[1:]}
    total = 0.0
    while best:
        v = min(best, key=lambda x: (best[x], x))
        total += best.pop(v)
        row = rows[v]
        for x in best:
            if row[x] < best[x]:
                best[x] = row[x]
    return total
