"""Skip-gram with negative sampling over a walk corpus."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from . import rng as _rng
from .walks import WalkCorpus


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbedParams:
    dim: int = 32
    window: int = 5
    epochs_max: int = 5
    learning_rate: float = 0.025
    min_learning_rate: float = 1e-4
    negatives: int = 5
    patience: int = 2
    # relative to the first epoch's loss
    min_delta_rel: float = 1e-4
    seed: int = 0
    output: str = "center"  # center | context | sum

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.epochs_max < 1 or self.negatives < 1:
            raise ValueError("dim, window, epochs_max and negatives must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.output not in ("center", "context", "sum"):
            raise ValueError(f"unknown output {self.output!r}")


@dataclass
class PointCloud:
    """``n x d`` embedding matrix; row ``i`` belongs to node ``i``."""

    matrix: np.ndarray
    graph_id: str = "graph"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError("point cloud must be a 2-D matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("point cloud has non-finite entries")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def with_matrix(self, matrix: np.ndarray) -> "PointCloud":
        return PointCloud(matrix, self.graph_id, dict(self.provenance))


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def sgns_loss(center, context, negatives) -> float:
    center, context = np.asarray(center, float), np.asarray(context, float)
    neg = np.atleast_2d(np.asarray(negatives, float)).reshape(-1, center.shape[0])
    loss = np.logaddexp(0.0, -center @ context)
    loss += np.logaddexp(0.0, neg @ center).sum()
    return float(loss)


def sgns_gradients(center, context, negatives):
    """Gradients of ``-log s(c.o) - sum log s(-c.n)``.

    Returns ``(d_center, d_context, d_negatives)`` with ``d_negatives`` shaped
    like the stacked negatives.
    """
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    neg = np.asarray(negatives, dtype=np.float64)
    if neg.size == 0:
        neg = neg.reshape(0, center.shape[0])
    neg = np.atleast_2d(neg)
    if center.ndim != 1 or context.shape != center.shape or neg.shape[1] != center.shape[0]:
        raise ValueError("all vectors must share one dimension")
    g_pos = sigmoid(center @ context) - 1.0
    g_neg = sigmoid(neg @ center)
    d_center = g_pos * context + g_neg @ neg
    d_context = g_pos * center
    d_neg = g_neg[:, None] * center[None, :]
    return d_center, d_context, d_neg


class NegativeSampler:
    """Draws nodes with probability proportional to corpus frequency ** 0.75."""

    def __init__(self, counts: np.ndarray, power: float = 0.75):
        counts = np.asarray(counts, dtype=np.float64)
        weights = counts**power
        if weights.sum() <= 0:
            raise ValueError("empty frequency table")
        self.probs = weights / weights.sum()
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    @classmethod
    def from_corpus(cls, corpus: WalkCorpus) -> "NegativeSampler":
        return cls(corpus.node_counts())

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        idx = np.searchsorted(self._cum, u, side="right")
        return np.minimum(idx, len(self._cum) - 1)


def negative_sampler(corpus: WalkCorpus, rng: np.random.Generator) -> int:
    return int(NegativeSampler.from_corpus(corpus).sample(rng))


@numba.njit(cache=True)
def _pairs_kernel(flat, starts, window, out):
    m = 0
    for w in range(starts.shape[0] - 1):
        a, b = starts[w], starts[w + 1]
        for t in range(a, b):
            lo = max(a, t - window)
            hi = min(b, t + window + 1)
            for u in range(lo, hi):
                if u != t:
                    out[m, 0] = flat[t]
                    out[m, 1] = flat[u]
                    m += 1
    return m


def training_pairs(corpus: WalkCorpus, window: int) -> np.ndarray:
    """(center, context) pairs within ``window`` steps, never crossing walks.

    Ordered by walk, then center position, then context position.
    """
    lengths = np.array([len(w) for w in corpus.walks], dtype=np.int64)
    starts = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    flat = np.concatenate(corpus.walks).astype(np.int64)
    span = np.minimum(lengths - 1, window)
    bound = int((lengths * 2 * span).sum())
    out = np.empty((bound, 2), dtype=np.int64)
    m = _pairs_kernel(flat, starts, window, out)
    return out[:m].copy()


@numba.njit(cache=True)
def _sgns_epoch(W, V, pairs, negs, lr0, lr_end, step0, total_steps):
    d = W.shape[1]
    k = negs.shape[1]
    grad_c = np.empty(d)
    loss = 0.0
    for t in range(pairs.shape[0]):
        frac = (step0 + t) / total_steps
        lr = lr0 - (lr0 - lr_end) * frac
        if lr < lr_end:
            lr = lr_end
        c = pairs[t, 0]
        o = pairs[t, 1]
        for j in range(d):
            grad_c[j] = 0.0
        for s in range(k + 1):
            if s == 0:
                tgt = o
                label = 1.0
            else:
                tgt = negs[t, s - 1]
                label = 0.0
            dot = 0.0
            for j in range(d):
                dot += W[c, j] * V[tgt, j]
            # numerically stable log-sigmoid pieces
            if dot >= 0:
                e = math.exp(-dot)
                sig = 1.0 / (1.0 + e)
                lsp = math.log1p(e)  # -log s(dot)
                lsn = dot + lsp  # -log s(-dot)
            else:
                e = math.exp(dot)
                sig = e / (1.0 + e)
                lsn = math.log1p(e)
                lsp = -dot + lsn
            if label == 1.0:
                loss += lsp
            else:
                loss += lsn
            g = sig - label
            for j in range(d):
                grad_c[j] += g * V[tgt, j]
                V[tgt, j] -= lr * g * W[c, j]
        for j in range(d):
            W[c, j] -= lr * grad_c[j]
    return loss


class EarlyStopping:
    """Stops after ``patience`` epochs without an improvement of ``min_delta``."""

    def __init__(self, patience: int, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.wait = 0

    def update(self, loss: float) -> bool:
        """Record one epoch's loss; True means stop."""
        if loss < self.best - self.min_delta:
            self.best = loss
            self.wait = 0
        else:
            self.wait += 1
        return self.wait >= self.patience


def run_epochs(loss_fn, epochs_max: int, patience: int, min_delta_rel: float) -> list[float]:
    """Call ``loss_fn(epoch)`` until the budget runs out or early stopping fires."""
    trace: list[float] = []
    stopper = None
    for epoch in range(epochs_max):
        loss = loss_fn(epoch)
        trace.append(loss)
        if stopper is None:
            stopper = EarlyStopping(patience, min_delta_rel * abs(loss))
            stopper.update(loss)
        elif stopper.update(loss):
            break
    return trace


def train(corpus: WalkCorpus, params: EmbedParams) -> tuple[PointCloud, list[float]]:
    """Fit SGNS embeddings; returns the point cloud and the per-epoch mean loss."""
    if len(corpus) == 0:
        raise TrainingError("empty corpus")
    counts = corpus.node_counts()
    missing = np.flatnonzero(counts == 0)
    if len(missing):
        raise TrainingError(f"node {int(missing[0])} does not appear in the corpus")
    n, d, k = corpus.num_nodes, params.dim, params.negatives

    init = _rng.stream(params.seed, _rng.INIT)
    W = (init.random((n, d)) - 0.5) / d
    V = np.zeros((n, d))
    pairs = training_pairs(corpus, params.window)
    sampler = NegativeSampler(counts)
    total = max(1, len(pairs) * params.epochs_max)

    def epoch_loss(epoch: int) -> float:
        if len(pairs) == 0:
            return 0.0
        gen = _rng.stream(params.seed, _rng.NEGATIVES, epoch)
        order = gen.permutation(len(pairs))
        negs = sampler.sample(gen, (len(pairs), k))
        s = _sgns_epoch(
            W, V, pairs[order], negs.astype(np.int64), params.learning_rate,
            params.min_learning_rate, epoch * len(pairs), total,
        )
        mean = s / (len(pairs) * (k + 1))
        if not math.isfinite(mean) or not np.all(np.isfinite(W)):
            raise TrainingError(f"non-finite loss in epoch {epoch}; learning rate too high?")
        return mean

    trace = run_epochs(epoch_loss, params.epochs_max, params.patience, params.min_delta_rel)
    out = {"center": W, "context": V, "sum": W + V}[params.output]
    prov = {
        "walk": asdict(corpus.params),
        "embed": asdict(params),
        "init": "uniform[-0.5/d, 0.5/d] center, zero context",
        "epochs_run": len(trace),
    }
    return PointCloud(out.copy(), corpus.graph_id, prov), trace
