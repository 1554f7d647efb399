"""Link-distribution distances and the threshold-sweep link classifier."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .skipgram import PointCloud


def _mat(x) -> np.ndarray:
    return x.matrix if isinstance(x, PointCloud) else np.asarray(x, dtype=np.float64)


def pair_index(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major ``(i, j)``, ``i < j`` indexing shared by every pair vector."""
    return np.triu_indices(n, k=1)


@dataclass(frozen=True)
class LinkDistribution:
    values: np.ndarray
    graph_id: str = "graph"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-9:
            raise ValueError("link distribution must be nonnegative and sum to 1")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return len(self.values)


def edge_indicator(g: Graph) -> np.ndarray:
    """0/1 vector over unordered pairs; any positive weight counts as an edge."""
    n = g.num_nodes
    y = np.zeros(n * (n - 1) // 2, dtype=bool)
    if g.num_edges:
        e = g.edge_array()
        i, j = e[:, 0], e[:, 1]
        # row-major position of (i, j) in the strict upper triangle
        y[i * n - i * (i + 1) // 2 + (j - i - 1)] = True
    return y


def observed_link_distribution(g: Graph) -> LinkDistribution:
    if g.num_edges == 0:
        raise ValueError("graph has no edges")
    return LinkDistribution(edge_indicator(g) / g.num_edges, g.graph_id)


def similarity(xi, xj) -> float:
    xi, xj = np.asarray(xi, dtype=np.float64), np.asarray(xj, dtype=np.float64)
    if xi.shape != xj.shape:
        raise ValueError(f"dimension mismatch: {xi.shape} vs {xj.shape}")
    return float(xi @ xj)


def pair_scores(x) -> np.ndarray:
    m = _mat(x)
    i, j = pair_index(len(m))
    return np.einsum("ij,ij->i", m[i], m[j])


def empirical_link_distribution(x) -> LinkDistribution:
    m = _mat(x)
    if len(m) < 2:
        raise ValueError("need at least two points")
    s = pair_scores(m)
    raw = 0.5 * (1.0 + np.tanh(0.5 * s))
    gid = x.graph_id if isinstance(x, PointCloud) else "graph"
    return LinkDistribution(raw / raw.sum(), gid)


def distribution_distance(p: LinkDistribution, q: LinkDistribution, mode: str = "discrete") -> float:
    """Wasserstein-1 between two link distributions.

    ``discrete`` uses the 0/1 ground metric on pair indices (total variation);
    ``sorted-1d`` compares the sorted per-pair probability profiles.
    """
    a = p.values if isinstance(p, LinkDistribution) else np.asarray(p, dtype=np.float64)
    b = q.values if isinstance(q, LinkDistribution) else np.asarray(q, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if mode == "discrete":
        return float(0.5 * np.abs(a - b).sum())
    if mode == "sorted-1d":
        return float(np.abs(np.sort(a) - np.sort(b)).mean())
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class ScoreSweep:
    """Contingency counts at every distinct score threshold, ascending.

    At ``thresholds[k]`` the predicted edge set is every pair scoring at
    least that value.
    """

    thresholds: np.ndarray
    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray
    graph_id: str = "graph"

    @property
    def positives(self) -> int:
        return int(self.tp[0] + self.fn[0])

    @property
    def negatives(self) -> int:
        return int(self.fp[0] + self.tn[0])


def sweep_from_scores(scores, labels, graph_id: str = "graph") -> ScoreSweep:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must align")
    thr, inv = np.unique(scores, return_inverse=True)
    pos_at = np.bincount(inv, weights=labels, minlength=len(thr))
    all_at = np.bincount(inv, minlength=len(thr))
    # predicted set at thr[k] = everything with rank >= k
    tp = np.cumsum(pos_at[::-1])[::-1].astype(np.int64)
    pred = np.cumsum(all_at[::-1])[::-1].astype(np.int64)
    fp = pred - tp
    P, N = int(labels.sum()), int((~labels).sum())
    return ScoreSweep(thr, tp, fp, N - fp, P - tp, graph_id)


def score_sweep(g: Graph, x) -> ScoreSweep:
    m = _mat(x)
    if len(m) != g.num_nodes:
        raise ValueError(f"cloud has {len(m)} rows but graph has {g.num_nodes} nodes")
    return sweep_from_scores(pair_scores(m), edge_indicator(g), g.graph_id)


def auprc(sweep: ScoreSweep) -> float:
    """Step-wise area under precision-recall, thresholds taken high to low."""
    if sweep.positives == 0:
        raise ValueError("no positive pairs")
    tp = sweep.tp[::-1].astype(np.float64)
    fp = sweep.fp[::-1].astype(np.float64)
    recall = tp / sweep.positives
    precision = np.divide(tp, tp + fp, out=np.ones_like(tp), where=(tp + fp) > 0)
    d_recall = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(d_recall * precision))


def auroc(sweep: ScoreSweep) -> float:
    P, N = sweep.positives, sweep.negatives
    if P == 0 or N == 0:
        raise ValueError("AUROC needs both edges and non-edges")
    tpr = np.concatenate([[0.0], sweep.tp[::-1] / P])
    fpr = np.concatenate([[0.0], sweep.fp[::-1] / N])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))


def quality_metrics(g: Graph, x) -> dict[str, float]:
    """All four link-quality numbers for one embedding."""
    obs = observed_link_distribution(g)
    emp = empirical_link_distribution(x)
    sweep = score_sweep(g, x)
    return {
        "w_link_discrete": distribution_distance(obs, emp, "discrete"),
        "w_link_sorted1d": distribution_distance(obs, emp, "sorted-1d"),
        "auprc": auprc(sweep),
        "auroc": auroc(sweep),
    }
