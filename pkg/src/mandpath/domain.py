"""Planning states, their transition rules, and forward A* over them."""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

from .graph_core import mst_weight


class SearchTimeout(RuntimeError):
    pass


@dataclass(frozen=True)
class Instance:
    """A (start, dest, M) triple. Start and dest are dropped from M."""

    start: int
    dest: int
    mandatory: frozenset = frozenset()

    def __post_init__(self):
        m = frozenset(int(x) for x in self.mandatory) - {self.start, self.dest}
        object.__setattr__(self, "mandatory", m)

    def validate(self, n):
        nodes = (self.start, self.dest, *self.mandatory)
        if any(not 0 <= x < n for x in nodes):
            raise ValueError(f"instance {format_instance(self)} has nodes outside 0..{n - 1}")
        return self


def parse_instance(text):
    """``"start dest m1,m2,..."``; an empty mandatory list is written ``-``."""
    parts = text.split()
    if len(parts) != 3:
        raise ValueError(f"expected 'start dest m1,m2,...', got {text!r}")
    mand = () if parts[2] == "-" else tuple(int(x) for x in parts[2].split(","))
    return Instance(int(parts[0]), int(parts[1]), frozenset(mand))


def format_instance(s):
    mand = ",".join(str(x) for x in sorted(s.mandatory)) or "-"
    return f"{s.start} {s.dest} {mand}"


@dataclass
class SearchResult:
    path: list
    cost: float
    states_visited: int = 0
    elapsed: float = 0.0


# Transition rules work on un-normalized states: predecessors may list the
# current start node as still mandatory, which Instance would strip.
@dataclass(frozen=True)
class State:
    start: int
    dest: int
    mandatory: frozenset = field(default=frozenset())


def _as_state(s):
    return State(s.start, s.dest, frozenset(s.mandatory))


def is_end_state(s):
    return s.start == s.dest and not s.mandatory


def successors(s, g):
    if is_end_state(s):
        raise ValueError("end states have no successors")
    out = []
    for nxt, w in g.neighbors(s.start):
        out.append((State(nxt, s.dest, frozenset(s.mandatory) - {nxt}), w))
    return out


def predecessors(s, g):
    m = frozenset(s.mandatory)
    out = []
    for prev, w in g.neighbors(s.start):
        if prev not in m:
            cand = State(prev, s.dest, m)
            if not is_end_state(cand):
                out.append((cand, w))
        if s.start != s.dest:
            cand = State(prev, s.dest, m | {s.start})
            if not is_end_state(cand):
                out.append((cand, w))
    return out


def zero_heuristic(s):
    return 0.0


def make_mst_heuristic(t):
    """Cached ``s -> mst_heuristic(s, t)`` for repeated calls inside one search."""
    cache = {}
    rows = t.rows

    def h(s):
        m = s.mandatory
        if not m:
            return rows[s.start][s.dest]
        w = cache.get(m)
        if w is None:
            w = cache[m] = mst_weight(t, m)
        row_s, row_d = rows[s.start], rows[s.dest]
        return w + min(row_s[x] for x in m) + min(row_d[x] for x in m)

    return h


def mst_heuristic(s, t):
    """MST of M in the metric closure plus cheapest links from start and to dest.

    With no mandatory nodes left the exact remaining cost ``cost[start][dest]``
    is returned.
    """
    return float(make_mst_heuristic(t)(s))


def forward_astar(s, g, h=zero_heuristic, timeout=None):
    """Optimal A* over planning states; ties favour deeper states, then FIFO."""
    t0 = time.perf_counter()
    deadline = None if timeout is None else t0 + timeout
    root = _as_state(s)
    best_g = {root: 0.0}
    parent = {root: None}
    counter = itertools.count()
    open_heap = [(h(root), -0.0, next(counter), root)]
    visited = 0
    while open_heap:
        f, neg_g, _, u = heapq.heappop(open_heap)
        gu = -neg_g
        if gu > best_g[u]:
            continue
        visited += 1
        if deadline is not None and not visited % 256 and time.perf_counter() > deadline:
            raise SearchTimeout(f"forward A* exceeded {timeout}s")
        if is_end_state(u):
            path = []
            x = u
            while x is not None:
                path.append(x.start)
                x = parent[x]
            return SearchResult(path[::-1], gu, visited, time.perf_counter() - t0)
        for v, w in successors(u, g):
            gv = gu + w
            if gv < best_g.get(v, float("inf")):
                best_g[v] = gv
                parent[v] = u
                heapq.heappush(open_heap, (gv + h(v), -gv, next(counter), v))
    raise RuntimeError("unsolvable instance")  # impossible on connected graphs


def validate_result(s, g, result, rel_tol=1e-9):
    """Raise AssertionError unless ``result`` is a feasible solution of ``s``."""
    p = result.path
    assert p and p[0] == s.start and p[-1] == s.dest, "path endpoints"
    total = 0.0
    for u, v in zip(p, p[1:]):
        total += g.weight(u, v)  # KeyError when not adjacent
    assert set(s.mandatory) <= set(p), "mandatory node missing"
    assert abs(total - result.cost) <= rel_tol * max(1.0, abs(total)), "cost mismatch"
