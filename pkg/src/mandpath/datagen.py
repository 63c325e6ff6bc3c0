"""Self-supervised training data: optimal next-mandatory labels from backwards search.

Starting from each termination state ``(i, i, {})`` a uniform-cost search runs
over predecessor states. When a state leaves OPEN its cost-to-go is final, and
the first mandatory node on the recorded path becomes its label.
"""
from __future__ import annotations

import heapq
import logging
import time
from array import array
from dataclasses import dataclass, field

import numpy as np

from .domain import Instance

log = logging.getLogger(__name__)

_CHECK_EVERY = 1024
# keeps a full 10-minute run on ~20-node graphs within a few GB of memory
DEFAULT_MAX_PAIRS = 20_000_000
_DTYPES = {"q": np.int64, "Q": np.uint64, "d": np.float64}


@dataclass(frozen=True)
class TrainingPair:
    state: Instance
    label: int

    def __post_init__(self):
        if not self.state.mandatory:
            raise ValueError("training states need at least one mandatory node")
        if self.label not in self.state.mandatory:
            raise ValueError(f"label {self.label} is not a mandatory node of the state")


def _mask_of(nodes):
    m = 0
    for x in nodes:
        m |= 1 << int(x)
    return m


def _nodes_of(mask):
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


@dataclass
class Dataset:
    """Columnar store of (start, dest, mandatory bitmask, label) rows."""

    graph_id: str
    node_count: int
    starts: np.ndarray
    dests: np.ndarray
    masks: np.ndarray  # uint64 bitmask of the mandatory set
    labels: np.ndarray
    costs: np.ndarray | None = None  # optimal cost-to-go, when known
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        s = Instance(int(self.starts[i]), int(self.dests[i]), frozenset(_nodes_of(int(self.masks[i]))))
        return TrainingPair(s, int(self.labels[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def pairs(self):
        return list(self)

    def mandatory_counts(self):
        return np.array([int(m).bit_count() for m in self.masks], dtype=np.int64)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            self.graph_id,
            self.node_count,
            self.starts[idx],
            self.dests[idx],
            self.masks[idx],
            self.labels[idx],
            None if self.costs is None else self.costs[idx],
            dict(self.meta),
        )

    @classmethod
    def from_pairs(cls, graph_id, node_count, pairs, meta=None):
        pairs = list(pairs)
        return cls(
            graph_id,
            node_count,
            np.array([p.state.start for p in pairs], dtype=np.int64),
            np.array([p.state.dest for p in pairs], dtype=np.int64),
            np.array([_mask_of(p.state.mandatory) for p in pairs], dtype=np.uint64),
            np.array([p.label for p in pairs], dtype=np.int64),
            meta=dict(meta or {}),
        )


def _search_from(g, dest, deadline, max_mandatory, max_expansions, max_emit, cols):
    """Uniform-cost backwards search from ``(dest, dest, {})``.

    States are packed as ``mask << 8 | start``. Emitted rows are appended to
    the column arrays ``cols``; returns whether OPEN was exhausted.
    """
    c_start, c_dest, c_mask, c_label, c_cost = cols
    adj = g.adjacency
    best = {dest: 0.0}
    first = {}  # d(s); absent for the termination state
    closed = set()
    heap = [(0.0, dest, 0)]
    expansions = emitted = 0
    exhausted = True
    while heap:
        gs, start, mask = heapq.heappop(heap)
        key = mask << 8 | start
        if key in closed:
            continue  # stale entry left behind by a decrease-key
        closed.add(key)
        if mask:
            c_start.append(start)
            c_dest.append(dest)
            c_mask.append(mask)
            c_label.append(first[key])
            c_cost.append(gs)
            emitted += 1
            if emitted >= max_emit:
                exhausted = False
                break
        expansions += 1
        if max_expansions is not None and expansions >= max_expansions:
            exhausted = False
            break
        if not expansions % _CHECK_EVERY and time.perf_counter() > deadline:
            exhausted = False
            break
        d_here = first.get(key)
        grow = start != dest and mask.bit_count() < max_mandatory
        wider = mask | 1 << start
        for prev, w in adj[start]:
            pbit = 1 << prev
            if mask & pbit:
                # both variants would leave prev listed as mandatory while standing on it
                continue
            gn = gs + w
            if mask or prev != dest:
                k = mask << 8 | prev
                if gn < best.get(k, float("inf")):
                    if k in closed:
                        raise AssertionError("closed state improved: g is not final on pop")
                    best[k] = gn
                    if d_here is not None:
                        first[k] = d_here
                    heapq.heappush(heap, (gn, prev, mask))
            if grow:
                k = wider << 8 | prev
                if gn < best.get(k, float("inf")):
                    if k in closed:
                        raise AssertionError("closed state improved: g is not final on pop")
                    best[k] = gn
                    first[k] = start
                    heapq.heappush(heap, (gn, prev, wider))
    return exhausted


def backwards_astar_generate(g, budget, max_mandatory=12, graph_id="graph", seed=0, max_expansions=None,
                             max_pairs=DEFAULT_MAX_PAIRS):
    """Generate labelled states for every termination instance of ``g``.

    ``budget`` (seconds) is split evenly across the ``node_count`` runs.
    ``max_expansions`` optionally caps each run by popped states instead, which
    makes the output independent of machine speed. ``max_pairs`` bounds the
    total output (and so memory), again split evenly across runs.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    n = g.node_count
    if n > 63:
        raise ValueError("bitmask states support at most 63 nodes")
    share = budget / n
    per_run = float("inf") if max_pairs is None else -(-max_pairs // n)
    cols = (array("q"), array("q"), array("Q"), array("q"), array("d"))
    exhausted_runs = 0
    for dest in range(n):
        deadline = time.perf_counter() + share
        if _search_from(g, dest, deadline, max_mandatory, max_expansions, per_run, cols):
            exhausted_runs += 1
    if not cols[0]:
        log.warning("backwards search produced no training pairs; increase the budget")
    meta = {
        "seed": seed,
        "budget_s": budget,
        "max_mandatory": max_mandatory,
        "max_expansions": max_expansions,
        "max_pairs": max_pairs,
        "exhausted_runs": exhausted_runs,
        "termination_instances": n,
    }
    starts, dests, masks, labels, costs = (np.array(c, dtype=_DTYPES[c.typecode]) for c in cols)
    return Dataset(graph_id, n, starts, dests, masks, labels, costs, meta)


def shuffle_split(d, train_fraction, seed):
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(len(d))
    cut = int(round(train_fraction * len(d)))
    return d.subset(perm[:cut]), d.subset(perm[cut:])


def save_dataset(d, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"#graph {d.graph_id} seed {d.meta.get('seed', 0)}\n")
        fh.write(f"#nodes {d.node_count}\n")
        for s, t, m, lab in zip(d.starts.tolist(), d.dests.tolist(), d.masks.tolist(), d.labels.tolist()):
            mand = ",".join(map(str, _nodes_of(int(m))))
            fh.write(f"{s} {t} {mand} {lab}\n")


def load_dataset(path, node_count=None):
    graph_id, seed = "graph", 0
    rows = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[:1] == ["graph"] and len(parts) >= 4:
                    graph_id, seed = parts[1], int(parts[3])
                elif parts[:1] == ["nodes"] and node_count is None:
                    node_count = int(parts[1])
                continue
            try:
                s, t, mand, lab = line.split()
                m = 0 if mand == "-" else _mask_of(mand.split(","))
                rows.append((int(s), int(t), m, int(lab)))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'start dest m1,m2,... label'") from None
    if node_count is None:
        node_count = 1 + max((max(r[0], r[1], r[3], int(r[2]).bit_length() - 1) for r in rows), default=0)
    arr = np.array(rows, dtype=np.uint64).reshape(-1, 4)
    return Dataset(
        graph_id,
        node_count,
        arr[:, 0].astype(np.int64),
        arr[:, 1].astype(np.int64),
        arr[:, 2],
        arr[:, 3].astype(np.int64),
        meta={"seed": seed},
    )
