"""Wilcoxon tests, Bonferroni correction and all-pairs group comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.stats import norm, rankdata

from .metrics import DistanceMatrixSummary

EXACT_MAX_N = 25


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str  # exact | normal-approximation | degenerate

    __test__ = False  # not a pytest class

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def _signed_rank_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Number of sign patterns giving each value of 2*W+ (exact, int64)."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks.tolist():
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    return counts


def wilcoxon_signed_rank(a, b) -> TestResult:
    """Two-sided paired Wilcoxon signed-rank test.

    Zero differences are dropped and ties get midranks. For up to 25 nonzero
    differences the p-value is exact, from the full distribution of the
    statistic over all sign assignments; beyond that a tie-corrected normal
    approximation with continuity correction is used.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be 1-D and of equal length")
    if len(a) == 0:
        raise ValueError("samples are empty")
    d = a - b
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return TestResult(0.0, 1.0, 0, "degenerate")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)

    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _signed_rank_counts(doubled)
        k = int(round(2 * w))
        tail = int(counts[: k + 1].sum())
        p = min(1.0, 2.0 * tail / 2.0**n)
        return TestResult(w, p, n, "exact")

    mean = n * (n + 1) / 4
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - (tie_sizes**3 - tie_sizes).sum() / 48
    z = (abs(w - mean) - 0.5) / math.sqrt(var)
    p = min(1.0, 2.0 * float(norm.sf(max(z, 0.0))))
    return TestResult(w, p, n, "normal-approximation")


def rank_sum(a, b) -> TestResult:
    """Two-sided Mann-Whitney rank-sum test on unpaired samples.

    Exact under the permutation distribution of midranks when the pooled
    size is at most 50; otherwise tie-corrected normal approximation.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n1, n2 = len(a), len(b)
    if n1 == 0 or n2 == 0:
        raise ValueError("samples are empty")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    if np.all(pooled == pooled[0]):
        return TestResult(0.0, 1.0, n1 + n2, "degenerate")
    r1 = ranks[:n1].sum()
    u1 = r1 - n1 * (n1 + 1) / 2
    u = min(u1, n1 * n2 - u1)
    N = n1 + n2
    if N <= 50:
        doubled = np.rint(2 * ranks).astype(np.int64)
        top = int(doubled.sum())
        # table[k, s]: number of k-subsets with doubled-rank sum s
        table = np.zeros((n1 + 1, top + 1))
        table[0, 0] = 1.0
        for r in doubled.tolist():
            table[1:, r:] += table[:-1, : top + 1 - r].copy()
        dist = table[n1] / math.comb(N, n1)
        s = np.arange(top + 1) / 2.0 - n1 * (n1 + 1) / 2  # U value per sum
        lo = dist[s <= u + 1e-9].sum()
        hi = dist[s >= n1 * n2 - u - 1e-9].sum()
        p = min(1.0, lo + hi) if u < n1 * n2 / 2 else 1.0
        return TestResult(float(u), float(p), N, "exact")
    _, t = np.unique(ranks, return_counts=True)
    var = n1 * n2 / 12 * ((N + 1) - (t**3 - t).sum() / (N * (N - 1)))
    z = (abs(u - n1 * n2 / 2) - 0.5) / math.sqrt(var)
    return TestResult(float(u), min(1.0, 2 * float(norm.sf(max(z, 0.0)))), N, "normal-approximation")


def bonferroni(p_values, alpha: float = 0.05) -> list[bool]:
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    p = list(p_values)
    if not p:
        raise ValueError("no p-values")
    cut = alpha / len(p)
    return [pi < cut for pi in p]


@dataclass
class PairwiseComparisonReport:
    alpha: float
    pairs: list[tuple[str, str]] = field(default_factory=list)
    results: list[TestResult] = field(default_factory=list)
    significant: list[bool] = field(default_factory=list)
    test: str = "signed-rank"

    @property
    def m(self) -> int:
        return len(self.pairs)

    @property
    def fraction_significant(self) -> float:
        return sum(self.significant) / len(self.significant) if self.significant else 0.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "m": self.m,
            "test": self.test,
            "pairs": [
                {
                    "group_a": ga,
                    "group_b": gb,
                    "W": r.statistic,
                    "p": r.p_value,
                    "n_effective": r.n_effective,
                    "method": r.method,
                    "significant": s,
                }
                for (ga, gb), r, s in zip(self.pairs, self.results, self.significant)
            ],
            "fraction_significant": self.fraction_significant,
        }


def compare_all_groups(
    distances: DistanceMatrixSummary | dict, alpha: float = 0.05, paired: bool = True
) -> PairwiseComparisonReport:
    """Test every unordered pair of groups and Bonferroni-correct the family.

    Groups are compared in the order given. With ``paired`` the distance
    vectors are matched position by position (canonical repeat-pair order);
    otherwise an unpaired rank-sum test is used.
    """
    vecs = distances.distances if isinstance(distances, DistanceMatrixSummary) else distances
    labels = list(vecs)
    if paired:
        lengths = {len(vecs[g]) for g in labels}
        if len(lengths) > 1:
            raise ValueError(f"groups have unequal distance counts: {sorted(lengths)}")
    test = wilcoxon_signed_rank if paired else rank_sum
    report = PairwiseComparisonReport(alpha, test="signed-rank" if paired else "rank-sum")
    for ga, gb in combinations(labels, 2):
        report.pairs.append((ga, gb))
        report.results.append(test(vecs[ga], vecs[gb]))
    if report.pairs:
        report.significant = bonferroni([r.p_value for r in report.results], alpha)
    return report
