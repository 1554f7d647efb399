"""Distances, alignment and projection for embedding point clouds.

Functions accept either a :class:`~n2vlab.skipgram.PointCloud` or a plain
``n x d`` array and return the same kind they were given.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numba
import numpy as np
from scipy.spatial.distance import cdist, pdist

from .skipgram import PointCloud


def _mat(x) -> np.ndarray:
    m = x.matrix if isinstance(x, PointCloud) else np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("expected an n x d point cloud")
    return m


def _like(x, m: np.ndarray):
    return x.with_matrix(m) if isinstance(x, PointCloud) else m


def diameter(x) -> float:
    m = _mat(x)
    if len(m) < 2:
        return 0.0
    return float(pdist(m).max())


def normalize_diameter(x):
    """Scale about the origin so the largest pairwise distance is 1."""
    m = _mat(x)
    diam = diameter(m)
    if diam == 0.0:
        raise ValueError("point cloud has zero diameter")
    return _like(x, m / diam)


def hausdorff(x, y) -> float:
    a, b = _mat(x), _mat(y)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if not len(a) or not len(b):
        raise ValueError("point clouds must be nonempty")
    dist = cdist(a, b)
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


@numba.njit(cache=True)
def _hungarian(cost):
    # shortest augmenting path with row/column potentials, O(n^3)
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    minv = np.empty(n + 1)
    used = np.empty(n + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = -1
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0 != 0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    assign = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        assign[p[j] - 1] = j - 1
    return assign


def linear_assignment(cost: np.ndarray) -> np.ndarray:
    """Minimum-cost perfect matching; ``assign[i]`` is the column of row ``i``."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError("cost matrix must be square")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    if cost.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return _hungarian(np.ascontiguousarray(cost))


def w2_matching(x, y) -> tuple[float, np.ndarray]:
    """Wasserstein-2 distance and the optimal bijection as a row->row map."""
    a, b = _mat(x), _mat(y)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"cardinality mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    cost = cdist(a, b, "sqeuclidean")
    assign = linear_assignment(cost)
    total = cost[np.arange(len(a)), assign].sum()
    return float(np.sqrt(max(total, 0.0))), assign


def wasserstein2(x, y) -> float:
    return w2_matching(x, y)[0]


def procrustes_align(x, y, allow_reflection: bool = False):
    """Rotate ``x`` onto ``y`` after centering both.

    Returns ``(aligned, residual)``; ``aligned`` is carried to ``y``'s centroid
    and ``residual`` is the Frobenius norm of ``aligned - y``.
    """
    a, b = _mat(x), _mat(y)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    ac, bc = a - ma, b - mb
    u, _, vt = np.linalg.svd(ac.T @ bc)
    if not allow_reflection and np.linalg.det(u @ vt) < 0:
        u[:, -1] = -u[:, -1]
    rot = u @ vt
    aligned = ac @ rot + mb
    return _like(x, aligned), float(np.linalg.norm(aligned - b))


def pool_embeddings(clouds, align_first: bool = True):
    if not clouds:
        raise ValueError("no clouds to pool")
    ref = _mat(clouds[0])
    mats = []
    for c in clouds:
        m = _mat(c)
        if m.shape != ref.shape:
            raise ValueError("all clouds must have the same shape")
        if align_first and mats:
            m = procrustes_align(m, ref)[0]
        mats.append(m)
    return _like(clouds[0], np.mean(mats, axis=0))


def project_pca(x, k: int):
    """Project onto the top ``k`` principal axes.

    Returns ``(projection, explained_variance_ratio)``.
    """
    m = _mat(x)
    if not 1 <= k <= m.shape[1]:
        raise ValueError(f"k={k} must lie in [1, {m.shape[1]}]")
    centered = m - m.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s**2
    total = var.sum()
    ratios = var[:k] / total if total > 0 else np.zeros(k)
    proj = centered @ vt[:k].T
    if isinstance(x, PointCloud):
        proj = PointCloud(proj, x.graph_id, dict(x.provenance))
    return proj, ratios


METRICS = {"hausdorff": hausdorff, "wasserstein2": wasserstein2}


@dataclass
class DistanceMatrixSummary:
    """Intra-group distances between repeats, keyed by group label.

    ``distances[group]`` is ordered by repeat pair ``(i, j)``, ``i < j``,
    lexicographically; ``pairs[group]`` holds those repeat indices.
    """

    metric: str
    distances: dict[str, np.ndarray] = field(default_factory=dict)
    pairs: dict[str, list[tuple[int, int]]] = field(default_factory=dict)

    @property
    def groups(self) -> list[str]:
        return list(self.distances)

    def summary(self, group: str) -> dict:
        d = np.asarray(self.distances[group], dtype=np.float64)
        if not len(d):
            return {"count": 0}
        q1, med, q3 = np.quantile(d, [0.25, 0.5, 0.75])
        return {
            "count": int(len(d)),
            "min": float(d.min()),
            "q1": float(q1),
            "median": float(med),
            "q3": float(q3),
            "max": float(d.max()),
            "variance": float(d.var()),
        }


def intra_group_distances(clouds_by_group: dict[str, dict[int, object]], metric: str) -> DistanceMatrixSummary:
    """All repeat-pair distances within each group.

    ``clouds_by_group[label][repeat]`` is a cloud; repeats are paired in
    ascending index order.
    """
    fn = METRICS[metric]
    out = DistanceMatrixSummary(metric)
    for label, clouds in clouds_by_group.items():
        reps = sorted(clouds)
        pairs = list(combinations(reps, 2))
        out.pairs[label] = pairs
        out.distances[label] = np.array([fn(clouds[i], clouds[j]) for i, j in pairs], dtype=np.float64)
    return out
