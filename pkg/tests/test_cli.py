import csv
import json
import shutil
import subprocess
import sys

import pytest

from n2vlab import cloudio
from n2vlab.cli import EXIT_COMPUTE, EXIT_IO, EXIT_USAGE, main
from n2vlab.experiment import ResultStore
from n2vlab.graph import load_edge_list


def strict_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh, strict=True))


def test_generate_er_k3(tmp_path, capsys):
    out = tmp_path / "k3.txt"
    assert main(["generate", "--model", "er", "--n", "3", "--p", "1", "--seed", "0", "--out", str(out)]) == 0
    g, _ = load_edge_list(out.read_text())
    assert (g.num_nodes, g.num_edges) == (3, 3)
    assert "nodes=3 edges=3" in capsys.readouterr().out


def test_generate_sbm2(tmp_path):
    out = tmp_path / "sbm2.txt"
    args = ["generate", "--model", "sbm", "--blocks", "100,100", "--p-intra", "0.2", "--p-inter", "0.8",
            "--seed", "1", "--out", str(out)]
    assert main(args) == 0
    g, _ = load_edge_list(out.read_text())
    assert g.num_nodes == 200 and abs(g.num_edges - 9980) < 3 * 56.43


def test_generate_usage_errors(tmp_path):
    assert main(["generate", "--model", "er", "--n", "3", "--p", "1"]) == EXIT_USAGE
    assert main(["generate", "--model", "sbm", "--out", str(tmp_path / "x")]) == EXIT_USAGE
    assert main(["generate", "--model", "er", "--n", "3", "--p", "7", "--out", str(tmp_path / "x")]) == EXIT_COMPUTE
    assert main(["bogus"]) == EXIT_USAGE


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.txt"
    res = subprocess.run([sys.executable, "-m", "n2vlab", "generate", "--model", "er", "--n", "4", "--p", "1",
                          "--out", str(out)], capture_output=True, text=True)
    assert res.returncode == 0 and out.exists()
    res = subprocess.run([sys.executable, "-m", "n2vlab", "generate", "--model", "er"], capture_output=True)
    assert res.returncode != 0


def _spec_file(tmp_path, repeats):
    spec = {
        "graph": {"sbm": {"block_sizes": [6, 6], "p_intra": 0.8, "p_inter": 0.1, "seed": 3}, "id": "tiny"},
        "grid": {"L": [3], "N": [2], "d": [4], "C": [2], "q": [1, 2]},
        "repeats": repeats,
        "experiment_seed": 7,
        "training": {"epochs_max": 2},
    }
    path = tmp_path / f"spec{repeats}.json"
    path.write_text(json.dumps(spec))
    return path


def test_run_and_rerun(tmp_path, capsys):
    spec = _spec_file(tmp_path, 2)
    out = tmp_path / "store"
    assert main(["run", "--spec", str(spec), "--out", str(out)]) == 0
    assert len(ResultStore(out).records()) == 4
    capsys.readouterr()
    assert main(["run", "--spec", str(spec), "--out", str(out)]) == 0
    assert "all cells complete" in capsys.readouterr().err


def test_run_single_repeat_warns(tmp_path, caplog):
    spec = _spec_file(tmp_path, 1)
    out = tmp_path / "store"
    with caplog.at_level("WARNING"):
        assert main(["run", "--spec", str(spec), "--out", str(out)]) == 0
    assert "repeats=1" in caplog.text
    assert strict_rows(out / "distances.csv") == [["group_a", "run_a", "group_b", "run_b", "metric", "value"]]


def test_run_unreadable_spec(tmp_path):
    assert main(["run", "--spec", str(tmp_path / "missing.json"), "--out", str(tmp_path / "s")]) == EXIT_IO
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--spec", str(bad), "--out", str(tmp_path / "s")]) == EXIT_IO
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"graph": {"builtin": "lesmis"}, "grid": {"Z": [1]}}))
    assert main(["run", "--spec", str(wrong), "--out", str(tmp_path / "s")]) != 0


def test_run_needs_output_dir(tmp_path):
    assert main(["run", "--spec", str(_spec_file(tmp_path, 2))]) == EXIT_USAGE


def test_report_tables(tiny_store, tmp_path, capsys):
    root, _ = tiny_store
    store = tmp_path / "store"
    shutil.copytree(root, store)
    assert main(["report", "--store", str(store), "--pca", "2"]) == 0
    out = capsys.readouterr().out
    rep = store / "report"

    box = strict_rows(rep / "stability_boxplot.csv")
    assert box[0] == ["param_set", "metric", "run_a", "run_b", "value"]
    for metric in ("hausdorff", "wasserstein2"):
        assert sum(r[1] == metric for r in box[1:]) == 2 * 45

    qual = strict_rows(rep / "quality_boxplot.csv")
    assert {r[1] for r in qual[1:]} == {"w_link_discrete", "w_link_sorted1d", "auprc", "auroc"}

    pca = strict_rows(rep / "pca.csv")
    assert pca[0] == ["param_set", "repeat", "node", "pc1", "pc2"]
    assert len(pca) - 1 == 20 * 12

    sig = strict_rows(rep / "significance.csv")
    stab = json.loads((store / "stability_report.json").read_text())
    for row in sig[1:]:
        comp = stab["metrics"][row[0]]["comparison"]
        assert float(row[4]) == comp["fraction_significant"]
        assert int(row[2]) == comp["m"] and float(row[3]) == comp["alpha"]
        assert f"fraction_significant={comp['fraction_significant']!r}" in out


def test_store_csvs_parse_and_round_trip(tiny_store):
    root, _ = tiny_store
    records = {(r.param_set.label, r.repeat): r for r in ResultStore(root).records()}
    rows = strict_rows(root / "records.csv")
    assert len(rows) == 21
    for row in rows[1:]:
        rec = records[(row[1], int(row[2]))]
        assert int(row[3]) == rec.seed and row[5] == rec.cloud_ref
    for row in strict_rows(root / "quality.csv")[1:]:
        assert float(row[4]) == records[(row[1], int(row[2]))].metrics[row[3]]
    for name in ("distances.csv",):
        rows = strict_rows(root / name)
        assert all(len(r) == 6 for r in rows)


def test_report_empty_store(tmp_path):
    assert main(["report", "--store", str(tmp_path)]) == EXIT_IO
    (tmp_path / "manifest.json").write_text("{}")
    (tmp_path / "cells").mkdir()
    assert main(["report", "--store", str(tmp_path)]) == EXIT_COMPUTE


def test_dist_and_quality_subcommands(tiny_store, tmp_path, capsys):
    root, spec = tiny_store
    clouds = sorted((root / "clouds").glob("*.pcb"))
    assert main(["dist", str(clouds[0]), str(clouds[1])]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split(",")[0] for ln in lines] == ["hausdorff", "wasserstein2"]
    assert main(["dist", str(clouds[0]), str(clouds[0]), "--metric", "wasserstein2"]) == 0
    assert capsys.readouterr().out.strip() == "wasserstein2,0.0"

    from n2vlab.experiment import load_graph
    g = load_graph(spec.graph)
    gfile = tmp_path / "g.txt"
    gfile.write_text(g.to_edge_list(weighted=False))
    assert main(["quality", "--graph", str(gfile), "--cloud", str(clouds[0])]) == 0
    got = dict(ln.split(",") for ln in capsys.readouterr().out.strip().splitlines())
    rec = next(r for r in ResultStore(root).records() if r.cloud_ref.endswith(clouds[0].name))
    assert {k: float(v) for k, v in got.items()} == rec.metrics
    assert main(["dist", str(tmp_path / "none.pcb"), str(clouds[0])]) == EXIT_IO
