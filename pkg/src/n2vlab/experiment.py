"""Seeded grid experiments over node2vec hyperparameters and their result store.

A store is a directory::

    manifest.json          spec, graph summary, grid labels
    cells/<label>__r<k>.json   one committed record per (param set, repeat)
    clouds/<label>__r<k>.pcb   normalized point cloud (exact binary)
    records.csv            one row per cell
    quality.csv            long format: graph_id,param_set,repeat,metric,value
    distances.csv          group_a,run_a,group_b,run_b,metric,value
    stability_report.json

Cell files are the unit of commit; everything else is rebuilt from them, so
an interrupted run resumes by skipping cells whose file exists.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from . import cloudio
from . import rng as _rng
from .graph import Graph, SbmSpec, generate_er, generate_sbm, les_miserables, load_edge_list
from .linkquality import quality_metrics
from .metrics import METRICS, DistanceMatrixSummary, normalize_diameter
from .skipgram import EmbedParams, PointCloud, train
from .stats import compare_all_groups
from .walks import WalkParams, build_corpus

log = logging.getLogger(__name__)

PARAM_FIELDS = ("L", "N", "d", "C", "p", "q")
QUALITY_METRICS = ("w_link_discrete", "w_link_sorted1d", "auprc", "auroc")
DISTANCE_METRICS = ("hausdorff", "wasserstein2")
RECORD_COLUMNS = (
    "graph_id", "param_set", "repeat", "seed", "status", "cloud_ref",
    "epochs_run", "final_loss", "error", "started_at", "finished_at",
)
TIMESTAMP_COLUMNS = ("started_at", "finished_at")


def _num(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


@dataclass(frozen=True, order=True)
class ParamSet:
    L: int
    N: int
    d: int
    C: int
    p: float = 1.0
    q: float = 1.0

    def __post_init__(self):
        for name in PARAM_FIELDS:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def label(self) -> str:
        return "-".join(f"{k}{_num(getattr(self, k))}" for k in PARAM_FIELDS)

    @classmethod
    def from_label(cls, label: str) -> "ParamSet":
        parts = dict((tok[0], tok[1:]) for tok in label.split("-"))
        return cls(int(parts["L"]), int(parts["N"]), int(parts["d"]), int(parts["C"]),
                   float(parts["p"]), float(parts["q"]))


def param_distance(a: ParamSet, b: ParamSet) -> int:
    """Hamming distance: how many of the six hyperparameters differ."""
    return sum(getattr(a, k) != getattr(b, k) for k in PARAM_FIELDS)


@dataclass
class ExperimentSpec:
    graph: dict
    grid: dict
    repeats: int = 10
    experiment_seed: int = 0
    metrics: list = field(default_factory=lambda: list(QUALITY_METRICS))
    distance_metrics: list = field(default_factory=lambda: list(DISTANCE_METRICS))
    training: dict = field(default_factory=dict)
    alpha: float = 0.05
    cross_group: bool = True
    output_dir: str | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        unknown = set(self.grid) - set(PARAM_FIELDS)
        if unknown:
            raise ValueError(f"unknown grid parameters: {sorted(unknown)}")
        bad = set(self.metrics) - set(QUALITY_METRICS)
        if bad:
            raise ValueError(f"unknown quality metrics: {sorted(bad)}")
        bad = set(self.distance_metrics) - set(DISTANCE_METRICS)
        if bad:
            raise ValueError(f"unknown distance metrics: {sorted(bad)}")
        extra = set(self.training) - {f.name for f in fields(EmbedParams)}
        if extra:
            raise ValueError(f"unknown training options: {sorted(extra)}")
        if {"dim", "window", "seed"} & set(self.training):
            raise ValueError("dim, window and seed are set by the grid and cell seed")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown spec fields: {sorted(extra)}")
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        return cls.from_dict(json.loads(Path(path).read_text("utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


def enumerate_grid(spec: ExperimentSpec) -> list[ParamSet]:
    """Cartesian product of the grid, ascending in (L, N, d, C, p, q)."""
    defaults = {"N": [10], "p": [1.0], "q": [1.0]}
    axes = []
    for name in PARAM_FIELDS:
        values = spec.grid.get(name, defaults.get(name))
        if values is None:
            raise ValueError(f"grid has no values for {name}")
        if not isinstance(values, (list, tuple)):
            values = [values]
        if not values:
            raise ValueError(f"grid value list for {name} is empty")
        cast = float if name in ("p", "q") else int
        axes.append(sorted({cast(v) for v in values}))
    return [ParamSet(*combo) for combo in itertools.product(*axes)]


def load_graph(source: dict) -> Graph:
    kind = {"builtin", "path", "sbm", "er"} & set(source)
    if len(kind) != 1:
        raise ValueError("graph source needs exactly one of builtin, path, sbm, er")
    kind = kind.pop()
    weighted = bool(source.get("weighted", False))
    if kind == "builtin":
        if source["builtin"] != "lesmis":
            raise ValueError(f"unknown builtin graph {source['builtin']!r}")
        return les_miserables(weighted)
    if kind == "path":
        path = Path(source["path"])
        return load_edge_list(path.read_text("utf-8"), weighted, source.get("id", path.stem))[0]
    if kind == "sbm":
        s = source["sbm"]
        return generate_sbm(SbmSpec(tuple(s["block_sizes"]), s["p_intra"], s["p_inter"], s.get("seed", 0)),
                            source.get("id"))
    e = source["er"]
    return generate_er(e["n"], e["p"], e.get("seed", 0), source.get("id"))


def cell_seed(experiment_seed: int, ps: ParamSet, repeat: int) -> int:
    return _rng.stable_seed(experiment_seed, ps.label, repeat)


def cell_name(ps: ParamSet, repeat: int) -> str:
    return f"{ps.label}__r{repeat}"


@dataclass
class RunRecord:
    graph_id: str
    param_set: ParamSet
    repeat: int
    seed: int
    status: str = "ok"
    cloud_ref: str | None = None
    metrics: dict = field(default_factory=dict)
    loss_trace: list = field(default_factory=list)
    error: str | None = None
    started_at: float | None = None
    finished_at: float | None = None
    cloud: PointCloud | None = field(default=None, repr=False, compare=False)
    root: Path | None = field(default=None, repr=False, compare=False)

    def load_cloud(self) -> PointCloud:
        if self.cloud is None:
            if self.cloud_ref is None:
                raise ValueError(f"record {self.param_set.label} r{self.repeat} has no cloud")
            self.cloud = cloudio.load(Path(self.root or ".") / self.cloud_ref)
        return self.cloud

    def to_json(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "param_set": self.param_set.label,
            "params": asdict(self.param_set),
            "repeat": self.repeat,
            "seed": self.seed,
            "status": self.status,
            "cloud_ref": self.cloud_ref,
            "metrics": self.metrics,
            "loss_trace": self.loss_trace,
            "error": self.error,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
        }

    @classmethod
    def from_json(cls, obj: dict, root: Path | None = None) -> "RunRecord":
        return cls(
            obj["graph_id"], ParamSet(**obj["params"]), obj["repeat"], obj["seed"], obj["status"],
            obj["cloud_ref"], obj["metrics"], obj["loss_trace"], obj["error"],
            obj["started_at"], obj["finished_at"], root=root,
        )


def run_cell(graph: Graph, ps: ParamSet, repeat: int, spec: ExperimentSpec) -> tuple[RunRecord, bytes | None]:
    """Corpus, training, normalization and quality metrics for one cell."""
    seed = cell_seed(spec.experiment_seed, ps, repeat)
    rec = RunRecord(graph.graph_id, ps, repeat, seed, started_at=time.time())
    try:
        wp = WalkParams(ps.L, ps.N, ps.p, ps.q, seed)
        ep = EmbedParams(dim=ps.d, window=ps.C, seed=seed, **spec.training)
        cloud, trace = train(build_corpus(graph, wp), ep)
        cloud = normalize_diameter(cloud)
        cloud.provenance["repeat"] = repeat
        cloud.provenance["param_set"] = ps.label
        qm = quality_metrics(graph, cloud) if spec.metrics else {}
        rec.metrics = {k: qm[k] for k in spec.metrics}
        rec.loss_trace = trace
        rec.cloud_ref = f"clouds/{cell_name(ps, repeat)}.pcb"
        payload = cloudio.dumps_binary(cloud)
    except Exception as exc:  # a failed cell must not stop the experiment
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        log.debug("cell %s r%d failed\n%s", ps.label, repeat, traceback.format_exc())
        payload = None
    rec.finished_at = time.time()
    return rec, payload


_WORKER: dict = {}


def _init_worker(graph: Graph, spec: ExperimentSpec) -> None:
    _WORKER["graph"], _WORKER["spec"] = graph, spec


def _work(task):
    ps, repeat = task
    return run_cell(_WORKER["graph"], ps, repeat, _WORKER["spec"])


def default_threads() -> int:
    return max(1, int(os.environ.get("N2VLAB_THREADS", "1")))


class ResultStore:
    def __init__(self, root):
        self.root = Path(root)

    @property
    def cells_dir(self) -> Path:
        return self.root / "cells"

    def cell_path(self, ps: ParamSet, repeat: int) -> Path:
        return self.cells_dir / f"{cell_name(ps, repeat)}.json"

    def is_complete(self, ps: ParamSet, repeat: int) -> bool:
        path = self.cell_path(ps, repeat)
        if not path.exists():
            return False
        return json.loads(path.read_text("utf-8"))["status"] == "ok"

    def init(self, spec: ExperimentSpec, graph: Graph, grid: list[ParamSet]) -> None:
        self.cells_dir.mkdir(parents=True, exist_ok=True)
        (self.root / "clouds").mkdir(exist_ok=True)
        manifest = {
            "format": "n2vlab-store v1",
            "spec": spec.to_dict(),
            "graph": {"graph_id": graph.graph_id, "num_nodes": graph.num_nodes, "num_edges": graph.num_edges},
            "param_sets": [ps.label for ps in grid],
            "repeats": spec.repeats,
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        path = self.root / "manifest.json"
        if path.exists() and path.read_text("utf-8") != text:
            old = json.loads(path.read_text("utf-8"))
            if old.get("spec") != manifest["spec"]:
                raise ValueError(f"store {self.root} belongs to a different experiment spec")
        cloudio.atomic_write(path, text)

    def manifest(self) -> dict:
        path = self.root / "manifest.json"
        if not path.exists():
            raise FileNotFoundError(f"{self.root} is not a result store (no manifest.json)")
        return json.loads(path.read_text("utf-8"))

    def commit(self, rec: RunRecord, payload: bytes | None) -> None:
        # cloud first, record second: a record file implies its cloud exists
        if payload is not None:
            cloudio.atomic_write(self.root / rec.cloud_ref, payload)
        text = json.dumps(rec.to_json(), indent=1, sort_keys=True) + "\n"
        cloudio.atomic_write(self.cell_path(rec.param_set, rec.repeat), text)

    def records(self) -> list[RunRecord]:
        out = []
        for path in sorted(self.cells_dir.glob("*.json")):
            out.append(RunRecord.from_json(json.loads(path.read_text("utf-8")), self.root))
        out.sort(key=lambda r: (r.param_set, r.repeat))
        return out


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def group_clouds(records: list[RunRecord], repeats: int | None = None):
    """Clouds of successful cells keyed by label then repeat.

    Groups missing any of ``repeats`` repeats are returned separately as
    incomplete so paired tests only see equal-length vectors.
    """
    groups: dict[str, dict[int, RunRecord]] = {}
    params: dict[str, ParamSet] = {}
    for r in records:
        params[r.param_set.label] = r.param_set
        groups.setdefault(r.param_set.label, {})
        if r.status == "ok":
            groups[r.param_set.label][r.repeat] = r
    if repeats is None:
        repeats = max((len(g) for g in groups.values()), default=0)
    complete = {k: v for k, v in groups.items() if len(v) == repeats}
    incomplete = sorted(k for k in groups if k not in complete)
    order = sorted(complete, key=lambda k: params[k])
    return {k: complete[k] for k in order}, incomplete, params


def compute_distances(records: list[RunRecord], metrics=DISTANCE_METRICS, cross_group: bool = True,
                      repeats: int | None = None):
    """Intra-group summaries per metric plus long-format distance rows.

    Cross-group rows are only produced for groups sharing an embedding
    dimension, since the distances are undefined across dimensions.
    """
    groups, incomplete, params = group_clouds(records, repeats)
    summaries: dict[str, DistanceMatrixSummary] = {}
    rows: list[tuple] = []
    for metric in metrics:
        fn = METRICS[metric]
        summ = DistanceMatrixSummary(metric)
        for label, recs in groups.items():
            reps = sorted(recs)
            pairs = list(itertools.combinations(reps, 2))
            vals = []
            for i, j in pairs:
                v = fn(recs[i].load_cloud(), recs[j].load_cloud())
                vals.append(v)
                rows.append((label, i, label, j, metric, v))
            summ.distances[label] = np.array(vals, dtype=np.float64)
            summ.pairs[label] = pairs
        summaries[metric] = summ
        if cross_group:
            for la, lb in itertools.combinations(groups, 2):
                if params[la].d != params[lb].d:
                    continue
                for i in sorted(groups[la]):
                    for j in sorted(groups[lb]):
                        v = fn(groups[la][i].load_cloud(), groups[lb][j].load_cloud())
                        rows.append((la, i, lb, j, metric, v))
    return summaries, rows, incomplete, params


def _spearman(xs, ys) -> dict:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if len(xs) < 2 or np.ptp(xs) == 0 or np.ptp(ys) == 0:
        return {"rho": None, "p_value": None, "n_pairs": int(len(xs)), "degenerate": True}
    res = spearmanr(xs, ys)
    return {"rho": float(res.statistic), "p_value": float(res.pvalue), "n_pairs": int(len(xs)),
            "degenerate": False}


def stability_report(records: list[RunRecord], alpha: float = 0.05, metrics=DISTANCE_METRICS,
                     repeats: int | None = None, _distances=None) -> dict:
    """Group distance summaries, all-pairs tests and the Hamming rank correlation."""
    if _distances is None:
        _distances = compute_distances(records, metrics, True, repeats)
    summaries, rows, incomplete, params = _distances
    groups = list(next(iter(summaries.values())).distances) if summaries else []
    if len(groups) < 2:
        raise ValueError("stability report needs at least two complete groups")
    if any(len(v) < 1 for v in next(iter(summaries.values())).distances.values()):
        raise ValueError("stability report needs at least two repeats per group")

    report = {"alpha": alpha, "groups": groups, "excluded_groups": incomplete, "metrics": {}}
    for metric, summ in summaries.items():
        cross: dict[tuple[str, str], list[float]] = {}
        for ga, _, gb, _, m, v in rows:
            if m == metric and ga != gb:
                cross.setdefault((ga, gb), []).append(v)
        ham, med = [], []
        for (ga, gb), vals in cross.items():
            ham.append(param_distance(params[ga], params[gb]))
            med.append(float(np.median(vals)))
        report["metrics"][metric] = {
            "group_summaries": {g: summ.summary(g) for g in groups},
            "comparison": compare_all_groups(summ, alpha, paired=True).to_dict(),
            "comparison_unpaired": compare_all_groups(summ, alpha, paired=False).to_dict(),
            "hamming_spearman": _spearman(ham, med),
        }
    return report


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def finalize_store(store: ResultStore, spec: ExperimentSpec) -> list[RunRecord]:
    """Rebuild the derived CSVs and the stability report from committed cells."""
    records = store.records()
    rec_rows = []
    qual_rows = []
    for r in records:
        final = r.loss_trace[-1] if r.loss_trace else None
        rec_rows.append([_fmt(v) for v in (
            r.graph_id, r.param_set.label, r.repeat, r.seed, r.status, r.cloud_ref,
            len(r.loss_trace), final, r.error, r.started_at, r.finished_at)])
        for m in spec.metrics:
            if m in r.metrics:
                qual_rows.append([r.graph_id, r.param_set.label, r.repeat, m, _fmt(r.metrics[m])])
    cloudio.atomic_write(store.root / "records.csv", _csv_text(RECORD_COLUMNS, rec_rows))
    cloudio.atomic_write(store.root / "quality.csv",
                         _csv_text(("graph_id", "param_set", "repeat", "metric", "value"), qual_rows))

    dist = compute_distances(records, spec.distance_metrics, spec.cross_group, spec.repeats) \
        if spec.repeats >= 2 else ({}, [], [], {})
    dist_rows = [[a, i, b, j, m, _fmt(v)] for a, i, b, j, m, v in dist[1]]
    cloudio.atomic_write(store.root / "distances.csv",
                         _csv_text(("group_a", "run_a", "group_b", "run_b", "metric", "value"), dist_rows))

    report_path = store.root / "stability_report.json"
    try:
        report = stability_report(records, spec.alpha, spec.distance_metrics, spec.repeats, _distances=dist)
    except ValueError as exc:
        report = {"alpha": spec.alpha, "skipped": str(exc)}
        log.warning("stability report skipped: %s", exc)
    cloudio.atomic_write(report_path, json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return records


def run_experiment(spec: ExperimentSpec, output_dir=None, threads: int | None = None,
                   progress=None) -> list[RunRecord]:
    """Run every missing cell of ``spec`` and rebuild the store's derived files."""
    out = output_dir or spec.output_dir
    if out is None:
        raise ValueError("no output directory given")
    graph = load_graph(spec.graph)
    grid = enumerate_grid(spec)
    store = ResultStore(out)
    store.init(spec, graph, grid)

    todo = [(ps, r) for ps in grid for r in range(spec.repeats) if not store.is_complete(ps, r)]
    total = len(grid) * spec.repeats
    log.info("%d of %d cells to run", len(todo), total)
    threads = threads or default_threads()
    done = total - len(todo)

    def _commit(rec, payload):
        nonlocal done
        store.commit(rec, payload)
        done += 1
        if rec.status != "ok":
            log.warning("cell %s r%d failed: %s", rec.param_set.label, rec.repeat, rec.error)
        if progress:
            progress(done, total, rec)

    if threads > 1 and len(todo) > 1:
        with ProcessPoolExecutor(threads, initializer=_init_worker, initargs=(graph, spec)) as pool:
            for rec, payload in pool.map(_work, todo):
                _commit(rec, payload)
    else:
        for ps, r in todo:
            _commit(*run_cell(graph, ps, r, spec))

    records = store.records()
    if records and all(r.status != "ok" for r in records):
        raise RuntimeError("every cell of the experiment failed")
    finalize_store(store, spec)
    return records
