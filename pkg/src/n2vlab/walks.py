"""Second-order (p, q) biased random walks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .graph import Graph


@dataclass(frozen=True)
class WalkParams:
    walk_length: int = 10
    walks_per_node: int = 10
    p: float = 1.0
    q: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.walk_length < 1 or self.walks_per_node < 1:
            raise ValueError("walk_length and walks_per_node must be >= 1")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")


@dataclass(frozen=True)
class WalkCorpus:
    walks: tuple[np.ndarray, ...]
    params: WalkParams
    graph_id: str
    num_nodes: int

    def __len__(self) -> int:
        return len(self.walks)

    def node_counts(self) -> np.ndarray:
        return np.bincount(np.concatenate(self.walks), minlength=self.num_nodes)

    def dumps(self) -> str:
        return "".join(" ".join(map(str, w.tolist())) + "\n" for w in self.walks)


def transition_weights(g: Graph, prev: int | None, cur: int, p: float, q: float) -> np.ndarray:
    """Unnormalized step weights over ``g.neighbors(cur)``."""
    nbrs, w = g.neighbors(cur), g.weights(cur)
    if prev is None or len(nbrs) == 0:
        return w.copy()
    back = g._nbr_sets[prev]
    alpha = np.fromiter(
        (1.0 / p if x == prev else (1.0 if x in back else 1.0 / q) for x in nbrs.tolist()),
        dtype=np.float64,
        count=len(nbrs),
    )
    return w * alpha


def walk_step(
    g: Graph, prev: int | None, cur: int, params: WalkParams, rng: np.random.Generator
) -> int | None:
    """Sample the next node of a (p, q) walk, or None if ``cur`` is isolated."""
    nbrs = g.neighbors(cur)
    if len(nbrs) == 0:
        return None
    if prev is not None and not g.has_edge(prev, cur):
        raise ValueError(f"prev {prev} is not adjacent to cur {cur}")
    cum = np.cumsum(transition_weights(g, prev, cur, params.p, params.q))
    i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return int(nbrs[min(i, len(nbrs) - 1)])


def simulate_walk(g: Graph, start: int, params: WalkParams, rng: np.random.Generator) -> np.ndarray:
    walk = [start]
    prev = None
    for _ in range(params.walk_length):
        nxt = walk_step(g, prev, walk[-1], params, rng)
        if nxt is None:
            break
        prev = walk[-1]
        walk.append(nxt)
    return np.array(walk, dtype=np.int64)


def build_corpus(g: Graph, params: WalkParams) -> WalkCorpus:
    """``walks_per_node`` walks from every node, ordered by (node, repetition).

    Each walk draws from its own stream keyed by (seed, node, repetition), so
    the corpus does not depend on how the work is scheduled.
    """
    if g.num_nodes == 0:
        raise ValueError("graph has no nodes")
    walks = []
    for v in range(g.num_nodes):
        for r in range(params.walks_per_node):
            walks.append(simulate_walk(g, v, params, _rng.stream(params.seed, _rng.WALKS, v, r)))
    return WalkCorpus(tuple(walks), params, g.graph_id, g.num_nodes)
