import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from n2vlab.graph import Graph, edge_density
from n2vlab.linkquality import (
    LinkDistribution,
    auprc,
    auroc,
    distribution_distance,
    edge_indicator,
    empirical_link_distribution,
    observed_link_distribution,
    pair_scores,
    quality_metrics,
    score_sweep,
    similarity,
    sweep_from_scores,
)


def test_observed_distribution_examples(k3, path3, lesmis):
    assert np.allclose(observed_link_distribution(k3).values, [1 / 3] * 3)
    # pairs in order (0,1), (0,2), (1,2)
    assert np.allclose(observed_link_distribution(path3).values, [0.5, 0.0, 0.5])
    v = observed_link_distribution(lesmis).values
    assert len(v) == 2926
    assert np.sum(v == 1 / 254) == 254 and np.sum(v == 0) == 2672


def test_observed_distribution_needs_edges():
    with pytest.raises(ValueError):
        observed_link_distribution(Graph.from_edges(3, []))


def test_edge_indicator_matches_pair_index(lesmis):
    y = edge_indicator(lesmis)
    pairs = list(itertools.combinations(range(77), 2))
    assert {pairs[k] for k in np.flatnonzero(y)} == {(u, v) for u, v, _ in lesmis.edges}


def test_similarity():
    assert similarity([1, 0], [0, 1]) == 0
    assert similarity([0.6, 0.8], [0.6, 0.8]) == pytest.approx(1)
    assert similarity([1, 2], [3, -1]) == 1
    with pytest.raises(ValueError):
        similarity([1, 2], [1, 2, 3])


def test_empirical_distribution_examples():
    assert np.allclose(empirical_link_distribution(np.ones((4, 3))).values, 1 / 6)
    assert np.allclose(empirical_link_distribution(np.array([[5.0, 1.0], [-3.0, 2.0]])).values, [1.0])
    # dots (0,1)=0, (0,2)=0, (1,2)=ln 3 -> raw (1/2, 1/2, 3/4) -> (2/7, 2/7, 3/7)
    s = math.sqrt(math.log(3))
    x = np.array([[0.0, 0.0], [s, 0.0], [s, 0.0]])
    assert np.allclose(empirical_link_distribution(x).values, [2 / 7, 2 / 7, 3 / 7])
    with pytest.raises(ValueError):
        empirical_link_distribution(np.ones((1, 2)))


def test_empirical_distribution_orthogonal_invariance(rng):
    x = rng.normal(size=(15, 4))
    q = special_ortho_group.rvs(4, random_state=3)
    a = empirical_link_distribution(x).values
    b = empirical_link_distribution(x @ q).values
    assert np.allclose(a, b, atol=1e-12)
    assert a.sum() == pytest.approx(1, abs=1e-9) and np.all(a >= 0)


def test_link_distribution_validation():
    with pytest.raises(ValueError):
        LinkDistribution(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        LinkDistribution(np.array([1.5, -0.5]))


def test_distribution_distance_examples():
    p = LinkDistribution(np.array([1.0, 0.0]))
    q = LinkDistribution(np.array([0.25, 0.75]))
    assert distribution_distance(p, p) == 0
    assert distribution_distance(p, p, "sorted-1d") == 0
    assert distribution_distance(p, LinkDistribution(np.array([0.0, 1.0]))) == 1.0
    assert distribution_distance(p, q) == pytest.approx(0.75)
    # sorted profiles (0, 1) vs (0.25, 0.75): mean |diff| = 0.25
    assert distribution_distance(p, q, "sorted-1d") == pytest.approx(0.25)
    with pytest.raises(ValueError):
        distribution_distance(p, LinkDistribution(np.ones(3) / 3))
    with pytest.raises(ValueError):
        distribution_distance(p, q, "kl")


def test_sorted1d_matches_scipy_wasserstein(rng):
    from scipy.stats import wasserstein_distance

    a, b = rng.random(20), rng.random(20)
    a, b = a / a.sum(), b / b.sum()
    assert distribution_distance(a, b, "sorted-1d") == pytest.approx(wasserstein_distance(a, b))


def brute_sweep(scores, labels):
    rows = []
    for lam in sorted(set(scores)):
        pred = [s >= lam for s in scores]
        tp = sum(p and y for p, y in zip(pred, labels))
        fp = sum(p and not y for p, y in zip(pred, labels))
        tn = sum(not p and not y for p, y in zip(pred, labels))
        fn = sum(not p and y for p, y in zip(pred, labels))
        rows.append((lam, tp, fp, tn, fn))
    return rows


def brute_auprc(scores, labels):
    # descending over distinct thresholds: sum of recall increments x precision
    rows = sorted(brute_sweep(scores, labels), reverse=True)
    P = sum(labels)
    area, prev_recall = 0.0, 0.0
    for _, tp, fp, _, _ in rows:
        recall = tp / P
        precision = tp / (tp + fp) if tp + fp else 1.0
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def u_statistic(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


def test_sweep_on_four_nodes_matches_enumeration():
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    x = np.array([[1.0, 0.0], [0.9, 0.4], [0.1, 1.0], [-0.5, 0.7]])
    sweep = score_sweep(g, x)
    scores = pair_scores(x).tolist()
    labels = edge_indicator(g).tolist()
    for k, (lam, tp, fp, tn, fn) in enumerate(brute_sweep(scores, labels)):
        assert sweep.thresholds[k] == lam
        assert (sweep.tp[k], sweep.fp[k], sweep.tn[k], sweep.fn[k]) == (tp, fp, tn, fn)


def test_perfect_scores(lesmis):
    y = edge_indicator(lesmis)
    sweep = sweep_from_scores(y.astype(float), y)
    assert any(tp == lesmis.num_edges and fp == 0 for tp, fp in zip(sweep.tp, sweep.fp))
    assert auprc(sweep) == 1.0 and auroc(sweep) == 1.0


def test_constant_scores(lesmis):
    y = edge_indicator(lesmis)
    sweep = sweep_from_scores(np.zeros(len(y)), y)
    assert len(sweep.thresholds) == 1
    assert sweep.tp[0] == 254 and sweep.fp[0] == 2926 - 254
    assert auprc(sweep) == pytest.approx(edge_density(lesmis), abs=1e-15)
    assert auroc(sweep) == 0.5


def test_random_instances_against_oracles(rng):
    for _ in range(50):
        n = 6
        m = n * (n - 1) // 2
        labels = rng.random(m) < 0.4
        if labels.all() or not labels.any():
            continue
        scores = np.round(rng.normal(size=m), 1)  # rounding forces ties
        sweep = sweep_from_scores(scores, labels)
        assert auprc(sweep) == pytest.approx(brute_auprc(scores.tolist(), labels.tolist()), abs=1e-12)
        assert auroc(sweep) == pytest.approx(u_statistic(scores.tolist(), labels.tolist()), abs=1e-12)


def test_auroc_equals_u_statistic_exhaustively_small_graphs(rng):
    for n in range(3, 9):
        m = n * (n - 1) // 2
        for _ in range(5):
            labels = np.zeros(m, bool)
            labels[rng.choice(m, rng.integers(1, m), replace=False)] = True
            scores = rng.integers(0, 4, m).astype(float)
            assert auroc(sweep_from_scores(scores, labels)) == pytest.approx(
                u_statistic(scores.tolist(), labels.tolist()), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5).map(lambda v: round(v, 3)), st.booleans()), min_size=4, max_size=30))
def test_sweep_identities_and_monotone_invariance(data):
    scores = np.array([s for s, _ in data])
    labels = np.array([y for _, y in data])
    sweep = sweep_from_scores(scores, labels)
    P, N = labels.sum(), (~labels).sum()
    assert np.all(sweep.tp + sweep.fn == P) and np.all(sweep.fp + sweep.tn == N)
    assert np.all(np.diff(sweep.tp) <= 0)
    if P and N:
        t = sweep_from_scores(np.exp(scores) * 3 + 1, labels)
        assert auprc(t) == pytest.approx(auprc(sweep), abs=1e-12)
        assert auroc(t) == pytest.approx(auroc(sweep), abs=1e-12)
        assert 0 <= auprc(sweep) <= 1 and 0 <= auroc(sweep) <= 1


def test_degenerate_classes():
    with pytest.raises(ValueError):
        auprc(sweep_from_scores([1.0, 2.0], [False, False]))
    with pytest.raises(ValueError):
        auroc(sweep_from_scores([1.0, 2.0], [True, True]))


def test_score_sweep_size_mismatch(k3):
    with pytest.raises(ValueError):
        score_sweep(k3, np.ones((4, 2)))


def test_quality_metrics_keys(lesmis, rng):
    q = quality_metrics(lesmis, rng.normal(size=(77, 3)))
    assert set(q) == {"w_link_discrete", "w_link_sorted1d", "auprc", "auroc"}
