"""Command line interface: ``n2vlab {generate,run,report,dist,quality}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import cloudio
from .experiment import (
    ExperimentSpec,
    ResultStore,
    default_threads,
    enumerate_grid,
    run_experiment,
)
from .graph import GraphParseError, SbmSpec, generate_er, generate_sbm, load_edge_list
from .linkquality import quality_metrics
from .metrics import hausdorff, project_pca, wasserstein2

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_COMPUTE = 4

log = logging.getLogger("n2vlab")


class UsageError(Exception):
    pass


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_generate(args) -> int:
    if args.model == "sbm":
        if not args.blocks or args.p_intra is None or args.p_inter is None:
            raise UsageError("sbm needs --blocks, --p-intra and --p-inter")
        blocks = tuple(int(b) for b in args.blocks.split(","))
        g = generate_sbm(SbmSpec(blocks, args.p_intra, args.p_inter, args.seed))
    else:
        if args.n is None or args.p is None:
            raise UsageError("er needs --n and --p")
        g = generate_er(args.n, args.p, args.seed)
    Path(args.out).write_text(g.to_edge_list(weighted=False), encoding="utf-8")
    print(f"nodes={g.num_nodes} edges={g.num_edges}")
    return EXIT_OK


def cmd_run(args) -> int:
    spec = ExperimentSpec.load(args.spec)
    out = args.out or spec.output_dir
    if out is None:
        raise UsageError("no output directory: pass --out or set output_dir in the spec")
    if spec.repeats < 2:
        log.warning("repeats=%d: no distance matrices or stability report will be produced", spec.repeats)
    store = ResultStore(out)
    total = len(enumerate_grid(spec)) * spec.repeats
    if (store.root / "manifest.json").exists():
        pending = sum(1 for ps in enumerate_grid(spec) for r in range(spec.repeats)
                      if not store.is_complete(ps, r))
        if pending == 0:
            print("all cells complete", file=sys.stderr)

    def progress(done, total_, rec):
        print(f"[{done}/{total_}] {rec.param_set.label} r{rec.repeat} {rec.status}", file=sys.stderr)

    records = run_experiment(spec, out, threads=args.threads, progress=progress)
    failed = sum(r.status != "ok" for r in records)
    print(f"{total} cells, {failed} failed; store at {out}", file=sys.stderr)
    return EXIT_OK


def cmd_report(args) -> int:
    store = ResultStore(args.store)
    manifest = store.manifest()
    records = store.records()
    if not records:
        raise RuntimeError(f"store {args.store} has no records")
    out = Path(args.out or store.root / "report")
    out.mkdir(parents=True, exist_ok=True)

    dist = _read_csv(store.root / "distances.csv")
    _write_csv(out / "stability_boxplot.csv", ("param_set", "metric", "run_a", "run_b", "value"),
               [(r["group_a"], r["metric"], r["run_a"], r["run_b"], r["value"])
                for r in dist if r["group_a"] == r["group_b"]])
    qual = _read_csv(store.root / "quality.csv")
    _write_csv(out / "quality_boxplot.csv", ("param_set", "metric", "repeat", "value"),
               [(r["param_set"], r["metric"], r["repeat"], r["value"]) for r in qual])

    report = json.loads((store.root / "stability_report.json").read_text("utf-8"))
    rows = []
    for metric, block in report.get("metrics", {}).items():
        comp = block["comparison"]
        rows.append((metric, comp["test"], comp["m"], comp["alpha"], comp["fraction_significant"]))
        print(f"{metric}: fraction_significant={comp['fraction_significant']!r} "
              f"(m={comp['m']}, alpha={comp['alpha']!r}, {comp['test']})")
    _write_csv(out / "significance.csv", ("metric", "test", "m", "alpha", "fraction_significant"), rows)

    if args.pca:
        pca_rows = []
        for r in records:
            if r.status != "ok":
                continue
            proj, _ = project_pca(r.load_cloud(), args.pca)
            for node, coords in enumerate(proj.matrix):
                pca_rows.append((r.param_set.label, r.repeat, node, *map(repr, coords.tolist())))
        _write_csv(out / "pca.csv", ("param_set", "repeat", "node", *[f"pc{i+1}" for i in range(args.pca)]),
                   pca_rows)
    print(f"{len(records)} records from {manifest['graph']['graph_id']}; tables in {out}")
    return EXIT_OK


def cmd_dist(args) -> int:
    a, b = cloudio.load(args.a), cloudio.load(args.b)
    out = {}
    if args.metric in ("hausdorff", "all"):
        out["hausdorff"] = hausdorff(a, b)
    if args.metric in ("wasserstein2", "all"):
        out["wasserstein2"] = wasserstein2(a, b)
    for k, v in out.items():
        print(f"{k},{v!r}")
    return EXIT_OK


def cmd_quality(args) -> int:
    text = Path(args.graph).read_text("utf-8")
    cloud = cloudio.load(args.cloud)
    # integer node names are taken as cloud row indices
    tokens = [ln.split("#", 1)[0].split()[:2] for ln in text.splitlines()]
    numeric = all(t.isdigit() for pair in tokens for t in pair)
    g, _ = load_edge_list(text, weighted=args.weighted, graph_id=Path(args.graph).stem,
                          numeric_ids=numeric, num_nodes=cloud.n if numeric else None)
    for k, v in quality_metrics(g, cloud).items():
        print(f"{k},{v!r}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="n2vlab", description="node2vec stability and quality laboratory")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random graph as an edge list")
    g.add_argument("--model", choices=("sbm", "er"), required=True)
    g.add_argument("--blocks", help="comma-separated block sizes (sbm)")
    g.add_argument("--p-intra", type=float)
    g.add_argument("--p-inter", type=float)
    g.add_argument("--n", type=int)
    g.add_argument("--p", type=float)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run (or resume) an experiment")
    r.add_argument("--spec", required=True)
    r.add_argument("--out")
    r.add_argument("--threads", type=int, default=None,
                   help="worker processes (default $N2VLAB_THREADS or 1)")
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", help="plot-ready CSV tables from a result store")
    rp.add_argument("--store", required=True)
    rp.add_argument("--out")
    rp.add_argument("--pca", type=int, default=0, help="also emit k-dim PCA coordinates")
    rp.set_defaults(func=cmd_report)

    d = sub.add_parser("dist", help="distance between two point cloud files")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--metric", choices=("hausdorff", "wasserstein2", "all"), default="all")
    d.set_defaults(func=cmd_dist)

    q = sub.add_parser("quality", help="link-quality metrics of one cloud")
    q.add_argument("--graph", required=True)
    q.add_argument("--cloud", required=True)
    q.add_argument("--weighted", action="store_true")
    q.set_defaults(func=cmd_quality)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if getattr(args, "threads", None) is None and args.command == "run":
        args.threads = default_threads()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"n2vlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GraphParseError, json.JSONDecodeError) as exc:
        print(f"n2vlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, RuntimeError) as exc:
        print(f"n2vlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
