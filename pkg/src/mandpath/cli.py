"""``mandpath`` command line: graphs, data, training, solving and benchmarks."""
from __future__ import annotations

import argparse
import logging
import sys

from . import bench, datagen, gcn
from .domain import parse_instance
from .graph_core import (GraphFormatError, all_pairs_shortest_paths, dump_graph, load_graph,
                         random_connected_graph)

EXIT_DISAGREEMENT = 2
EXIT_BAD_CONFIG = 3

log = logging.getLogger("mandpath")


def _read_graph(path):
    if not path:
        raise bench.ConfigError("--graph is required")
    with open(path, encoding="ascii") as fh:
        return load_graph(fh.read())


def _write(text, out):
    if out:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen_graph(args):
    g = random_connected_graph(args.nodes, args.degree, args.seed, (args.weight_low, args.weight_high))
    _write(dump_graph(g), args.out)


def cmd_apsp(args):
    t = all_pairs_shortest_paths(_read_graph(args.graph))
    lines = [" ".join(f"{v:.17g}" for v in row) for row in t.cost]
    _write("\n".join(lines) + "\n", args.out)


def cmd_gen_data(args):
    g = _read_graph(args.graph)
    d = datagen.backwards_astar_generate(g, args.budget_secs, args.max_mandatory, graph_id=args.graph_id,
                                         seed=args.seed, max_expansions=args.max_expansions,
                                         max_pairs=args.max_pairs)
    datagen.save_dataset(d, args.out or "dataset.txt")
    log.info("wrote %d pairs to %s", len(d), args.out or "dataset.txt")


def cmd_train(args):
    g = _read_graph(args.graph)
    d = datagen.load_dataset(args.data, node_count=g.node_count)
    m = gcn.init_model(g, seed=args.seed, graph_id=d.graph_id)
    curve = gcn.train(m, d, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed, lr=args.lr,
                      max_samples_per_epoch=args.samples_per_epoch,
                      callback=lambda e, loss: log.info("epoch %d loss %.6f", e, loss))
    out = args.model or args.out or "model.gcnp"
    gcn.save_model(m, out)
    if args.text_export:
        _write(gcn.export_text(m), args.text_export)
    log.info("final loss %.6f; model written to %s", curve[-1], out)


def _load_model_for(g, path):
    m = gcn.load_model(path)
    if m.n_nodes != g.node_count:
        raise bench.ConfigError(f"model is bound to {m.n_nodes} nodes, graph has {g.node_count}")
    return m


def cmd_solve(args):
    g = _read_graph(args.graph)
    t = all_pairs_shortest_paths(g)
    model = _load_model_for(g, args.model) if args.solver == "bnb_gcn" else None
    for text in args.instance:
        s = parse_instance(text).validate(g.node_count)
        rec = bench.run_solver(args.solver, s, g, t, model, args.timeout_secs, args.child_order)
        print(bench.format_record(rec))


def cmd_probe(args):
    g = _read_graph(args.graph)
    t = all_pairs_shortest_paths(g)
    m = _load_model_for(g, args.model)
    for text in args.instance:
        s = parse_instance(text).validate(g.node_count)
        path, cost, order = gcn.probe_upper_bound(m, s, t)
        print(f"order={','.join(map(str, order)) or '-'} cost={cost:.17g} path={' '.join(map(str, path))}")


def cmd_bench(args):
    cfg = bench.BenchmarkConfig()
    if args.config:
        with open(args.config, encoding="ascii") as fh:
            cfg = bench.parse_config(fh.read(), cfg)
    for key in ("graph", "model", "out", "seed", "timeout_secs"):
        value = getattr(args, key)
        if value is not None:
            setattr(cfg, key, value)
    if cfg.graph:
        g = _read_graph(cfg.graph)
    else:
        g = random_connected_graph(cfg.graph_nodes, cfg.graph_degree, cfg.graph_seed,
                                   (cfg.weight_low, cfg.weight_high))
    cfg.validate(g.node_count)
    t = all_pairs_shortest_paths(g)
    model = _load_model_for(g, cfg.model) if "bnb_gcn" in cfg.solvers else None
    report = bench.run_benchmark(cfg, g, t, model=model)
    paths = bench.emit_csv(report, cfg.out)
    for (solver, count), a in report.aggregates().items():
        print(f"{solver:10s} |M|={count:2d} n={a['instances']:4d} T/O={a['timeouts']:3d} "
              f"visits={a['mean_visits']:.1f} time_us={a['mean_elapsed_us']:.0f}")
    log.info("wrote %s and %s", *paths)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--graph")
    common.add_argument("--model")
    common.add_argument("--out")
    common.add_argument("--timeout-secs", type=float, default=None)
    common.add_argument("--config")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mandpath", parents=[common],
                                description="Optimal path planning through mandatory nodes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-graph", parents=[common], help="write a random connected graph")
    s.add_argument("--nodes", type=int, default=22)
    s.add_argument("--degree", type=float, default=3.0)
    s.add_argument("--weight-low", type=int, default=1)
    s.add_argument("--weight-high", type=int, default=100)
    s.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("apsp", parents=[common], help="print the all-pairs cost matrix")
    s.set_defaults(func=cmd_apsp)

    s = sub.add_parser("gen-data", parents=[common], help="generate training pairs by backwards search")
    s.add_argument("--budget-secs", type=float, default=600.0)
    s.add_argument("--max-mandatory", type=int, default=12)
    s.add_argument("--max-expansions", type=int, default=None)
    s.add_argument("--max-pairs", type=int, default=datagen.DEFAULT_MAX_PAIRS)
    s.add_argument("--graph-id", default="graph")
    s.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("train", parents=[common], help="train the GCN on a dataset file")
    s.add_argument("--data", required=True)
    s.add_argument("--epochs", type=int, default=10)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--lr", type=float, default=1e-4)
    s.add_argument("--samples-per-epoch", type=int, default=None)
    s.add_argument("--text-export")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", parents=[common], help="solve instances 'start dest m1,m2,...'")
    s.add_argument("instance", nargs="+")
    s.add_argument("--solver", choices=bench.SOLVERS, default="bnb")
    s.add_argument("--child-order", choices=("index", "nearest"), default="index")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("probe", parents=[common], help="GCN visiting order and its path cost")
    s.add_argument("instance", nargs="+")
    s.set_defaults(func=cmd_probe)

    s = sub.add_parser("bench", parents=[common], help="run the solver benchmark and write CSVs")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is None:
        args.seed = 0 if args.command != "bench" else None
    try:
        args.func(args)
    except bench.CostDisagreement as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISAGREEMENT
    except (bench.ConfigError, GraphFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
