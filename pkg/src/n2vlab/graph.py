"""Undirected weighted graphs, edge-list I/O and random graph generators."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from . import rng as _rng

log = logging.getLogger(__name__)


class GraphParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph on nodes ``0..num_nodes-1``.

    ``edges`` holds each edge once as ``(u, v, w)`` with ``u < v``, sorted.
    Use :meth:`from_edges` rather than the constructor.
    """

    num_nodes: int
    edges: tuple[tuple[int, int, float], ...]
    labels: tuple[str, ...] | None = None
    graph_id: str = "graph"
    _nbrs: tuple[np.ndarray, ...] = field(default=(), repr=False, compare=False)
    _wts: tuple[np.ndarray, ...] = field(default=(), repr=False, compare=False)
    _nbr_sets: tuple[frozenset, ...] = field(default=(), repr=False, compare=False)

    @classmethod
    def from_edges(
        cls,
        num_nodes: int,
        edges: Iterable[Sequence],
        labels: Sequence[str] | None = None,
        graph_id: str = "graph",
    ) -> "Graph":
        if num_nodes < 0:
            raise ValueError("num_nodes must be nonnegative")
        seen: dict[tuple[int, int], float] = {}
        for e in edges:
            u, v = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise ValueError(f"edge ({u}, {v}) out of range for {num_nodes} nodes")
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not w > 0:
                raise ValueError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (u, v) if u < v else (v, u)
            seen.setdefault(key, w)
        canon = tuple(sorted((u, v, w) for (u, v), w in seen.items()))

        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(num_nodes)]
        for u, v, w in canon:
            nbrs[u].append((v, w))
            nbrs[v].append((u, w))
        nbr_arr, wt_arr = [], []
        for lst in nbrs:
            lst.sort()
            nbr_arr.append(np.array([x for x, _ in lst], dtype=np.int64))
            wt_arr.append(np.array([w for _, w in lst], dtype=np.float64))
        if labels is not None:
            labels = tuple(labels)
            if len(labels) != num_nodes:
                raise ValueError("labels must have one entry per node")
        return cls(
            num_nodes,
            canon,
            labels,
            graph_id,
            tuple(nbr_arr),
            tuple(wt_arr),
            tuple(frozenset(a.tolist()) for a in nbr_arr),
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self._nbrs[v]

    def weights(self, v: int) -> np.ndarray:
        self._check_node(v)
        return self._wts[v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._nbr_sets[u]

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self._nbrs], dtype=np.int64)

    def edge_array(self) -> np.ndarray:
        """``(|E|, 2)`` int array of ``(u, v)`` with ``u < v``."""
        if not self.edges:
            return np.empty((0, 2), dtype=np.int64)
        return np.array([(u, v) for u, v, _ in self.edges], dtype=np.int64)

    def adjacency(self, weighted: bool = False) -> np.ndarray:
        a = np.zeros((self.num_nodes, self.num_nodes))
        for u, v, w in self.edges:
            a[u, v] = a[v, u] = w if weighted else 1.0
        return a

    def _check_node(self, v: int) -> None:
        if not (0 <= v < self.num_nodes):
            raise IndexError(f"invalid node id {v} (graph has {self.num_nodes} nodes)")

    # serialization -----------------------------------------------------

    def to_edge_list(self, weighted: bool = True) -> str:
        names = self.labels or tuple(str(i) for i in range(self.num_nodes))
        out = []
        for u, v, w in self.edges:
            out.append(f"{names[u]} {names[v]} {w!r}" if weighted else f"{names[u]} {names[v]}")
        return "\n".join(out) + ("\n" if out else "")

    def to_json(self) -> str:
        return json.dumps(
            {
                "num_nodes": self.num_nodes,
                "edges": [[u, v, w] for u, v, w in self.edges],
                "labels": list(self.labels) if self.labels else None,
            }
        )

    @classmethod
    def from_json(cls, text: str, graph_id: str = "graph") -> "Graph":
        obj = json.loads(text)
        return cls.from_edges(obj["num_nodes"], obj["edges"], obj.get("labels"), graph_id)


def load_edge_list(
    text: str | Iterable[str],
    weighted: bool = False,
    graph_id: str = "graph",
    numeric_ids: bool = False,
    num_nodes: int | None = None,
) -> tuple[Graph, int]:
    """Parse ``u v [w]`` lines into a :class:`Graph`.

    Node names are mapped to ids in order of first appearance. Duplicate
    edges keep the first weight; self-loops are dropped. Returns the graph
    and the number of dropped self-loops. With ``weighted=False`` any weight
    column is validated but every edge gets weight 1.

    ``numeric_ids`` instead reads tokens as the node ids themselves, which
    keeps ids aligned with an existing embedding; ``num_nodes`` then covers
    isolated trailing nodes.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    ids: dict[str, int] = {}
    edges: list[tuple[int, int, float]] = []
    seen: set[tuple[int, int]] = set()
    loops = 0
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) not in (2, 3):
            raise GraphParseError(lineno, f"expected 'u v' or 'u v w', got {len(tok)} tokens")
        w = 1.0
        if len(tok) == 3:
            try:
                w = float(tok[2])
            except ValueError:
                raise GraphParseError(lineno, f"non-numeric weight {tok[2]!r}") from None
            if not np.isfinite(w) or w <= 0:
                raise GraphParseError(lineno, f"weight must be positive, got {tok[2]!r}")
        if numeric_ids:
            try:
                u, v = int(tok[0]), int(tok[1])
            except ValueError:
                raise GraphParseError(lineno, "node ids must be integers") from None
            if u < 0 or v < 0:
                raise GraphParseError(lineno, "node ids must be nonnegative")
            ids.setdefault(tok[0], u)
            ids.setdefault(tok[1], v)
        else:
            u = ids.setdefault(tok[0], len(ids))
            v = ids.setdefault(tok[1], len(ids))
        if u == v:
            loops += 1
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            continue
        seen.add(key)
        edges.append((key[0], key[1], w if weighted else 1.0))
    if not ids:
        raise ValueError("edge list is empty")
    if loops:
        log.warning("dropped %d self-loop(s)", loops)
    if numeric_ids:
        n = max(ids.values()) + 1
        if num_nodes is not None:
            if num_nodes < n:
                raise ValueError(f"edge list uses node {n - 1} but num_nodes is {num_nodes}")
            n = num_nodes
        return Graph.from_edges(n, edges, graph_id=graph_id), loops
    return Graph.from_edges(len(ids), edges, list(ids), graph_id), loops


def les_miserables(weighted: bool = False) -> Graph:
    """Knuth's Les Misérables co-occurrence network (77 nodes, 254 edges)."""
    text = resources.files("n2vlab").joinpath("data/lesmis.txt").read_text("utf-8")
    return load_edge_list(text, weighted=weighted, graph_id="lesmis")[0]


@dataclass(frozen=True)
class SbmSpec:
    block_sizes: tuple[int, ...]
    p_intra: float
    p_inter: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if not self.block_sizes or any(b < 1 for b in self.block_sizes):
            raise ValueError("block sizes must be >= 1")
        for p in (self.p_intra, self.p_inter):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")


def _sample_pairs(prob: np.ndarray, seed: int, tag: int) -> np.ndarray:
    # prob is the upper-triangle probability vector in row-major pair order
    u = _rng.stream(seed, _rng.GRAPH_GEN, tag).random(len(prob))
    return u < prob


def generate_sbm(spec: SbmSpec, graph_id: str | None = None) -> Graph:
    sizes = spec.block_sizes
    n = sum(sizes)
    block = np.repeat(np.arange(len(sizes)), sizes)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(block[iu] == block[ju], spec.p_intra, spec.p_inter)
    keep = _sample_pairs(prob, spec.seed, 0)
    gid = graph_id or f"sbm{len(sizes)}-s{spec.seed}"
    return Graph.from_edges(n, zip(iu[keep].tolist(), ju[keep].tolist()), graph_id=gid)


def generate_er(n: int, p: float, seed: int, graph_id: str | None = None) -> Graph:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    # same pair stream as a one-block SBM, so SBM(p, p) and ER(n, p) coincide per seed
    return generate_sbm(SbmSpec((n,), p, p, seed), graph_id or f"er-n{n}-s{seed}")


def edge_density(g: Graph) -> float:
    if g.num_nodes < 2:
        raise ValueError("edge density needs at least 2 nodes")
    return g.num_edges / (g.num_nodes * (g.num_nodes - 1) / 2)
