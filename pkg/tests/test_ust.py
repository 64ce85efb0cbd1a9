import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from ustfusion.combinat import LinkPattern, enumerate_link_patterns, enumerate_valenced
from ustfusion.discrete import GridDomain, connection_probability, discrete_excursion_kernel
from ustfusion.ust import (
    SpanningForest,
    brute_force_oracle,
    detect_connectivity,
    enumerate_trees,
    exact_enumeration_oracle,
    matrix_tree_count,
    mc_estimate,
    mc_frequencies,
    wilson_batch,
    wilson_sample,
)


def test_matrix_tree_counts():
    assert matrix_tree_count(GridDomain(1, 1)) == 4
    assert matrix_tree_count(GridDomain(2, 1)) == 15
    assert matrix_tree_count(GridDomain(2, 2)) == 192
    assert matrix_tree_count(GridDomain(2, 2)) == sum(1 for _ in enumerate_trees(GridDomain(2, 2)))
    assert matrix_tree_count(GridDomain(3, 2)) == sum(1 for _ in enumerate_trees(GridDomain(3, 2)))


def test_single_vertex_uniform():
    G = GridDomain(1, 1)
    counts = Counter(wilson_sample(G, 7, i).parent for i in range(40000))
    assert sorted(counts) == [(-4,), (-3,), (-2,), (-1,)]
    assert chisquare(list(counts.values())).pvalue > 0.001


def test_two_by_two_matches_matrix_tree():
    G = GridDomain(2, 2)
    trees = list(enumerate_trees(G))
    counts = Counter(wilson_sample(G, 2024, i).parent for i in range(100000))
    assert set(counts) <= set(trees)
    observed = [counts.get(t, 0) for t in trees]
    assert chisquare(observed).pvalue > 0.001


def test_sampler_is_deterministic():
    G = GridDomain(4, 3)
    assert wilson_sample(G, 5, 3) == wilson_sample(G, 5, 3)
    assert len({wilson_sample(G, 5, i) for i in range(20)}) > 1
    F = wilson_sample(G, 1)
    assert F.is_valid()
    assert len(F.used_edges(G)) == G.n_vertices


def test_batch_independent_of_worker_count():
    G = GridDomain(5, 5, marked=(0, 3, 8, 14))
    a = wilson_batch(G, 99, 500, workers=1)
    b = wilson_batch(G, 99, 500, workers=3)
    assert np.array_equal(a, b)
    single = [wilson_sample(G, 99, i) for i in (0, 17, 499)]
    for i, F in zip((0, 17, 499), single):
        assert list(a[i]) == [F.exit_edge(G.boundary_edges[e][0]) for e in G.marked[0::2]]


def test_detect_connectivity_by_hand():
    G = GridDomain(1, 1, marked=(0, 2))
    out = detect_connectivity(SpanningForest((-1 - 2,)), G)
    assert out.conn and out.pairing == LinkPattern(((1, 2),))
    out = detect_connectivity(SpanningForest((-1 - 1,)), G)
    assert not out.conn and out.pairing is None


def test_detected_pairings_are_planar():
    G = GridDomain(4, 4, marked=(0, 2, 5, 9, 11, 14))
    planar = set(enumerate_link_patterns(3))
    for i in range(2000):
        out = detect_connectivity(wilson_sample(G, 3, i), G)
        if out.conn:
            assert out.pairing in planar


def test_frequencies_account_for_all_samples():
    G = GridDomain(3, 3, marked=(0, 2, 5, 8))
    freq = mc_frequencies(G, 5000, seed=1)
    assert sum(freq.values()) == 5000


@pytest.mark.parametrize("vals, marked", [((1, 1, 1, 1), (1, 4, 9, 13)), ((2, 1, 1), (0, 1, 6, 11))])
def test_mc_estimate_matches_exact(vals, marked):
    G = GridDomain(4, 4, marked=marked)
    n = 40000
    for alpha in enumerate_valenced(vals):
        p = float(connection_probability(G, vals, alpha))
        est = mc_estimate(G, vals, alpha, n, seed=12)
        assert est["n"] == n and est["seed"] == 12
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(est["estimate"] - p) < 4 * sigma


def test_oracle_denominator_and_single_link():
    G = GridDomain(3, 2, marked=(0, 5))
    p = exact_enumeration_oracle(G, (1, 1), [(1, 2)])
    # numerator counts trees, denominator is the Matrix-Tree total
    assert (p * matrix_tree_count(G)).denominator == 1
    assert p == discrete_excursion_kernel(G, 0, 5)


@pytest.mark.parametrize("shape, marked", [((2, 2), (0, 2, 4, 6)), ((3, 2), (0, 1, 4, 7)),
                                           ((3, 2), (1, 3, 5, 8))])
def test_oracles_agree(shape, marked):
    G = GridDomain(*shape, marked=marked)
    total = Fraction(0)
    for alpha in enumerate_link_patterns(2):
        p = exact_enumeration_oracle(G, (1, 1, 1, 1), alpha)
        assert p == brute_force_oracle(G, (1, 1, 1, 1), alpha)
        total += p
    assert total == exact_enumeration_oracle(G, (1, 1, 1, 1), None)
    assert total == brute_force_oracle(G, (1, 1, 1, 1), None)


def test_oracle_rejects_large_domains():
    with pytest.raises(ValueError):
        exact_enumeration_oracle(GridDomain(5, 5, marked=(0, 7)), (1, 1), [(1, 2)])
