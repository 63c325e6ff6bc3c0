import csv
import subprocess
import sys

import numpy as np
import pytest

from mandpath import bench, cli
from mandpath.datagen import load_dataset
from mandpath.gcn import load_model
from mandpath.graph_core import load_graph


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def graph_file(tmp_path):
    path = tmp_path / "g.txt"
    assert run("gen-graph", "--nodes", 9, "--degree", 3, "--seed", 4, "--out", path) == 0
    return path


def test_gen_graph_and_apsp(graph_file, tmp_path, capsys):
    g = load_graph(graph_file.read_text())
    assert g.node_count == 9
    assert run("apsp", "--graph", graph_file) == 0
    rows = [list(map(float, line.split())) for line in capsys.readouterr().out.splitlines()]
    assert len(rows) == 9 and all(rows[i][i] == 0 for i in range(9))


def test_data_train_probe_solve(graph_file, tmp_path, capsys):
    data, model = tmp_path / "d.txt", tmp_path / "m.gcnp"
    assert run("gen-data", "--graph", graph_file, "--budget-secs", 5, "--max-mandatory", 3,
               "--graph-id", "g9", "--seed", 2, "--out", data) == 0
    d = load_dataset(data)
    assert len(d) > 0 and d.graph_id == "g9" and d.meta["seed"] == 2
    assert run("train", "--graph", graph_file, "--data", data, "--epochs", 1, "--samples-per-epoch", 256,
               "--batch-size", 32, "--out", model, "--text-export", tmp_path / "m.txt") == 0
    assert load_model(model).graph_id == "g9"
    assert (tmp_path / "m.txt").read_text().startswith("# graph g9")
    capsys.readouterr()
    assert run("probe", "--graph", graph_file, "--model", model, "0 8 2,4,6", "1 1 -") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("order=") and sorted(lines[0].split()[0][6:].split(",")) == ["2", "4", "6"]
    assert lines[1].startswith("order=- cost=0")
    costs = set()
    for solver in bench.SOLVERS:
        assert run("solve", "--graph", graph_file, "--model", model, "--solver", solver, "0 8 2,4,6") == 0
        fields = capsys.readouterr().out.strip().split("\t")
        assert fields[0] == "0 8 2,4,6" and fields[1] == solver
        costs.add(fields[2])
    assert len(costs) == 1


def test_bench_with_config(graph_file, tmp_path, capsys):
    cfg = tmp_path / "bench.cfg"
    out = tmp_path / "res.csv"
    cfg.write_text("mandatory_counts=2,3\nsolvers=dp,bnb,astar_mst\ntiming=false\n")
    assert run("bench", "--graph", graph_file, "--config", cfg, "--out", out, "--seed", 3) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == bench.CSV_HEADER
    assert len(rows) - 1 == 3 * 2 * int(np.ceil(0.2 * 72))
    assert (tmp_path / "res_agg.csv").exists()
    assert "dp" in capsys.readouterr().out


def test_bench_generated_graph_without_solvers(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("graph_nodes=8\nmandatory_counts=2\nsolvers=\n")
    assert run("bench", "--config", cfg, "--out", tmp_path / "x.csv") == 0


@pytest.mark.parametrize("text", ["decimation_ratio=1.5", "mandatory_counts=30", "bogus=1", "solvers=bnb_gcn"])
def test_bench_invalid_config_exit_code(graph_file, tmp_path, text, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text + "\n")
    assert run("bench", "--graph", graph_file, "--config", cfg, "--out", tmp_path / "o.csv") == cli.EXIT_BAD_CONFIG
    assert "error:" in capsys.readouterr().err


def test_bad_inputs_exit_code(tmp_path, graph_file):
    bad = tmp_path / "bad.txt"
    bad.write_text("3 1\n0 1 1\n")
    assert run("apsp", "--graph", bad) == cli.EXIT_BAD_CONFIG
    assert run("apsp", "--graph", tmp_path / "missing.txt") == cli.EXIT_BAD_CONFIG
    assert run("solve", "--graph", graph_file, "0 99 1") == cli.EXIT_BAD_CONFIG


def test_disagreement_exit_code(monkeypatch, graph_file, tmp_path):
    real = bench.run_solver

    def lying(name, *a, **kw):
        r = real(name, *a, **kw)
        if name == "bnb":
            r.cost += 1
        return r

    monkeypatch.setattr(bench, "run_solver", lying)
    cfg = tmp_path / "c.cfg"
    cfg.write_text("mandatory_counts=2\nsolvers=dp,bnb\n")
    assert run("bench", "--graph", graph_file, "--config", cfg, "--out", tmp_path / "o.csv") == cli.EXIT_DISAGREEMENT


def test_module_entry_point(graph_file):
    res = subprocess.run([sys.executable, "-m", "mandpath", "solve", "--graph", str(graph_file), "0 8 -"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("0 8 -\tbnb\t")
