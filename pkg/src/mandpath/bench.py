"""Benchmark instance generation, solver runs and CSV reports."""
from __future__ import annotations

import csv
import logging
import math
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

from .bnb import dfs_branch_and_bound, dp_solve
from .domain import Instance, SearchTimeout, forward_astar, format_instance, make_mst_heuristic
from .gcn import probe_upper_bound

log = logging.getLogger(__name__)

SOLVERS = ("dp", "bnb", "astar_mst", "bnb_gcn")
CSV_HEADER = ["graph", "solver", "start", "dest", "mandatory_count", "cost", "visits", "elapsed_us", "timeout"]
AGG_HEADER = ["solver", "mandatory_count", "instances", "solved", "timeouts", "mean_visits", "mean_elapsed_us"]


class ConfigError(ValueError):
    pass


class CostDisagreement(RuntimeError):
    def __init__(self, instance, costs):
        self.instance = instance
        self.costs = costs
        super().__init__(f"solvers disagree on {format_instance(instance)}: {costs}")


@dataclass
class BenchmarkConfig:
    graph: str | None = None  # graph file; generated when absent
    graph_nodes: int = 22
    graph_degree: float = 3.0
    graph_seed: int = 0
    weight_low: int = 1
    weight_high: int = 100
    graph_id: str = "g0"
    decimation_ratio: float = 0.8
    mandatory_counts: tuple = tuple(range(5, 13))
    instances_per_pair_per_count: int = 1
    solvers: tuple = SOLVERS
    timeout_secs: float = 300.0
    out: str = "bench.csv"
    model: str | None = None
    seed: int = 0
    workers: int = 1
    timing: bool = True  # False writes elapsed_us = 0 for byte-reproducible CSVs
    child_order: str = "index"

    def validate(self, node_count=None):
        if not 0 <= self.decimation_ratio < 1:
            raise ConfigError("decimation_ratio must lie in [0, 1)")
        if not self.mandatory_counts:
            raise ConfigError("mandatory_counts must be nonempty")
        if any(c < 0 for c in self.mandatory_counts):
            raise ConfigError("mandatory counts must be nonnegative")
        if node_count is not None and any(c >= node_count - 1 for c in self.mandatory_counts):
            raise ConfigError(f"mandatory counts must be below {node_count - 1} for a {node_count}-node graph")
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ConfigError(f"unknown solvers {sorted(unknown)}; choose from {SOLVERS}")
        if self.instances_per_pair_per_count < 0 or self.timeout_secs <= 0 or self.workers < 1:
            raise ConfigError("counts, timeout and workers must be positive")
        return self


def _parse_counts(text):
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(x) for x in text.split(",") if x.strip())


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


_CONVERTERS = {
    "mandatory_counts": _parse_counts,
    "solvers": lambda v: tuple(x.strip() for x in v.split(",") if x.strip()),
    "timing": _parse_bool,
}


def parse_config(text, base=None):
    """``key=value`` lines over the defaults; ``#`` starts a comment."""
    cfg = base or BenchmarkConfig()
    kinds = {f.name: f.type for f in fields(BenchmarkConfig)}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (x.strip() for x in line.split("=", 1))
        if key not in kinds:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        setattr(cfg, key, _coerce(key, value, kinds[key], lineno))
    return cfg


def _coerce(key, value, kind, lineno=0):
    try:
        if key in _CONVERTERS:
            return _CONVERTERS[key](value)
        if kind.startswith("int"):
            return int(value)
        if kind.startswith("float"):
            return float(value)
        return value or None
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value {value!r} for {key}") from None


def generate_instances(g, t, cfg):
    """Instances on the longest ``1 - decimation_ratio`` share of ordered pairs."""
    n = g.node_count
    cfg.validate(n)
    rows = t.rows
    pairs = sorted(((i, j) for i in range(n) for j in range(n) if i != j),
                   key=lambda p: (-rows[p[0]][p[1]], p))
    keep = math.ceil((1 - cfg.decimation_ratio) * len(pairs) - 1e-9)
    rng = random.Random(cfg.seed)
    out = []
    for i, j in pairs[:keep]:
        pool = [x for x in range(n) if x not in (i, j)]
        for count in cfg.mandatory_counts:
            for _ in range(cfg.instances_per_pair_per_count):
                out.append(Instance(i, j, frozenset(rng.sample(pool, count))))
    return out


@dataclass
class SolverRecord:
    instance: Instance
    solver: str
    cost: float | None
    order: tuple | None
    visits: int | None
    elapsed_us: int
    timeout: bool = False


def format_record(r):
    order = "-" if not r.order else ",".join(map(str, r.order))
    cost = "T/O" if r.timeout else f"{r.cost:.17g}"
    visits = "" if r.visits is None else str(r.visits)
    return "\t".join([format_instance(r.instance), r.solver, cost, order, visits, str(r.elapsed_us)])


def run_solver(name, s, g, t, model=None, timeout=None, child_order="index"):
    """One timed solve; returns a :class:`SolverRecord`."""
    t0 = time.perf_counter()
    try:
        if name == "dp":
            order, cost, visits = dp_solve(s, t, timeout=timeout)
        elif name == "bnb":
            order, cost, stats = dfs_branch_and_bound(s, t, timeout=timeout, child_order=child_order)
            visits = stats.node_visits
        elif name == "bnb_gcn":
            _, ub, ub_order = probe_upper_bound(model, s, t)
            remaining = None if timeout is None else max(timeout - (time.perf_counter() - t0), 1e-9)
            order, cost, stats = dfs_branch_and_bound(s, t, (ub, ub_order), timeout=remaining,
                                                      child_order=child_order)
            visits = stats.node_visits
        elif name == "astar_mst":
            res = forward_astar(s, g, make_mst_heuristic(t), timeout=timeout)
            order, cost, visits = None, res.cost, res.states_visited
        else:
            raise ValueError(f"unknown solver {name!r}")
    except SearchTimeout:
        return SolverRecord(s, name, None, None, None, int((time.perf_counter() - t0) * 1e6), True)
    return SolverRecord(s, name, float(cost), order, visits, int((time.perf_counter() - t0) * 1e6))


@dataclass
class BenchmarkReport:
    graph_id: str
    solvers: tuple
    rows: list = field(default_factory=list)  # SolverRecord, instance-major

    def aggregates(self):
        """``{(solver, |M|): dict}`` with means over non-timeout rows."""
        acc = {}
        for r in self.rows:
            a = acc.setdefault((r.solver, len(r.instance.mandatory)),
                               {"instances": 0, "solved": 0, "timeouts": 0, "visits": 0, "elapsed": 0})
            a["instances"] += 1
            if r.timeout:
                a["timeouts"] += 1
            else:
                a["solved"] += 1
                a["visits"] += r.visits or 0
                a["elapsed"] += r.elapsed_us
        out = {}
        for key in sorted(acc, key=lambda k: (self.solvers.index(k[0]) if k[0] in self.solvers else 99, k[1])):
            a = acc[key]
            k = a["solved"]
            out[key] = {
                "instances": a["instances"],
                "solved": k,
                "timeouts": a["timeouts"],
                "mean_visits": a["visits"] / k if k else float("nan"),
                "mean_elapsed_us": a["elapsed"] / k if k else float("nan"),
            }
        return out

    def visit_reduction(self, base="bnb", other="bnb_gcn", mandatory_count=None):
        """Geometric mean of per-instance ``visits(base) / visits(other)``."""
        by_inst = {}
        for r in self.rows:
            if r.timeout or (mandatory_count is not None and len(r.instance.mandatory) != mandatory_count):
                continue
            by_inst.setdefault(r.instance, {})[r.solver] = r.visits
        logs = [math.log(max(v[base], 1) / max(v[other], 1))
                for v in by_inst.values() if base in v and other in v]
        return math.exp(sum(logs) / len(logs)) if logs else float("nan")


def _same_cost(a, b):
    if float(a).is_integer() and float(b).is_integer():
        return a == b
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def run_benchmark(cfg, g, t, instances=None, model=None):
    """Run every configured solver on every instance and cross-check the costs."""
    cfg.validate(g.node_count)
    if instances is None:
        instances = generate_instances(g, t, cfg)
    report = BenchmarkReport(cfg.graph_id, tuple(cfg.solvers))
    if not cfg.solvers:
        return report
    if "bnb_gcn" in cfg.solvers and model is None:
        raise ConfigError("solver bnb_gcn needs a model")

    def solve_all(s):
        recs = [run_solver(name, s, g, t, model, cfg.timeout_secs, cfg.child_order) for name in cfg.solvers]
        if not cfg.timing:
            for r in recs:
                r.elapsed_us = 0
        return recs

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(solve_all, instances))
    else:
        results = [solve_all(s) for s in instances]
    for s, recs in zip(instances, results):
        costs = {r.solver: r.cost for r in recs if not r.timeout}
        ref = next(iter(costs.values()), None)
        if any(not _same_cost(ref, c) for c in costs.values()):
            raise CostDisagreement(s, costs)
        report.rows.extend(recs)
    return report


def _csv_float(x):
    return f"{x:.17g}"


def aggregate_path(path):
    path = str(path)
    return (path[:-4] if path.endswith(".csv") else path) + "_agg.csv"


def emit_csv(report, path):
    """Write per-instance rows to ``path`` and per-(solver, |M|) means beside it."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.rows:
            s = r.instance
            w.writerow([
                report.graph_id, r.solver, s.start, s.dest, len(s.mandatory),
                "" if r.timeout else _csv_float(r.cost),
                "" if r.visits is None else r.visits,
                r.elapsed_us, int(r.timeout),
            ])
    agg = aggregate_path(path)
    with open(agg, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGG_HEADER)
        for (solver, count), a in report.aggregates().items():
            w.writerow([solver, count, a["instances"], a["solved"], a["timeouts"],
                        _csv_float(a["mean_visits"]), _csv_float(a["mean_elapsed_us"])])
    return path, agg
