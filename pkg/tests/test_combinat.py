import itertools
from fractions import Fraction

import pytest

from ustfusion.combinat import (
    LinkPattern,
    ValencedLinkPattern,
    catalan,
    compare,
    count_tilings,
    cumulative,
    dp_geq,
    enumerate_link_patterns,
    enumerate_valenced,
    factorial_det,
    factorial_matrix,
    fuse,
    fused_geq,
    row_strict_tableaux,
    rsyt_count,
    unfuse,
)
from ustfusion.exactnum import ExactScalar, det_exact

RAINBOW2 = LinkPattern(((1, 4), (2, 3)))
PAIRS2 = LinkPattern(((1, 2), (3, 4)))

# valence vectors with 2N <= 8 and max s_j <= N
SMALL_VALENCES = [
    (1, 1), (1, 1, 1, 1), (2, 1, 1), (1, 2, 1), (2, 2), (1, 1, 1, 1, 1, 1),
    (2, 2, 2), (3, 3), (1, 2, 3), (3, 1, 1, 1), (1, 1, 1, 3), (2, 2, 2, 2),
    (4, 4), (1, 3, 3, 1), (2, 4, 2), (1, 1, 2, 2, 1, 1),
]


def _matchings(points):
    if not points:
        yield []
        return
    a = points[0]
    for k in range(1, len(points)):
        rest = points[1:k] + points[k + 1:]
        for m in _matchings(rest):
            yield [(a, points[k])] + m


def test_enumeration_small_cases():
    assert enumerate_link_patterns(1) == (LinkPattern(((1, 2),)),)
    assert len(enumerate_link_patterns(3)) == 5
    assert len(enumerate_link_patterns(4)) == 14


@pytest.mark.parametrize("n", range(1, 7))
def test_enumeration_is_catalan(n):
    pats = enumerate_link_patterns(n)
    assert len(pats) == catalan(n)
    assert len(set(pats)) == len(pats)
    # canonical order: lexicographic in the left endpoints
    keys = [p.starts for p in pats]
    assert keys == sorted(keys)


@pytest.mark.parametrize("n", range(1, 6))
def test_planarity_criteria_agree(n):
    """Non-crossing test, Dyck reconstruction and the enumeration agree."""
    planar = set(enumerate_link_patterns(n))
    for m in _matchings(list(range(1, 2 * n + 1))):
        crossing = any(a < c < b < d or c < a < d < b
                       for (a, b), (c, d) in itertools.combinations(m, 2))
        try:
            p = LinkPattern(tuple(m))
        except ValueError:
            p = None
        assert (p is None) == crossing
        if p is not None:
            assert p in planar
            assert min(p.dyck_path) == 0 and p.dyck_path[-1] == 0
            assert LinkPattern.from_dyck(p.dyck_path) == p


def test_link_pattern_rejects_bad_input():
    with pytest.raises(ValueError):
        LinkPattern(((1, 3), (2, 4)))
    with pytest.raises(ValueError):
        LinkPattern(((1, 2), (2, 3)))


def test_valenced_enumeration_examples():
    (p,) = enumerate_valenced((1, 1))
    assert p.links() == [(1, 2)]
    (p,) = enumerate_valenced((2, 2))
    assert p.count(1, 2) == 2
    assert len(enumerate_valenced((1, 1, 1, 1))) == 2 == rsyt_count((1, 1, 1, 1))


def test_valenced_rejects_inner_and_oversized():
    with pytest.raises(ValueError):
        ValencedLinkPattern.from_links((2, 2), [(1, 1), (2, 2)])
    with pytest.raises(ValueError):
        enumerate_valenced((3, 1))
    with pytest.raises(ValueError):
        ValencedLinkPattern.from_links((1, 1, 1), [(1, 2)])


@pytest.mark.parametrize("vals", SMALL_VALENCES)
def test_rsyt_count_matches_valenced_enumeration(vals):
    assert rsyt_count(vals) == len(enumerate_valenced(vals))
    for left, right in row_strict_tableaux(vals):
        assert all(a < b for a, b in zip(left, right))


def test_unfuse_examples():
    (double,) = enumerate_valenced((2, 2))
    assert unfuse(double) == RAINBOW2
    assert unfuse(ValencedLinkPattern.from_links((1, 1), [(1, 2)])) == LinkPattern(((1, 2),))


def test_unfuse_worked_example():
    # five-link example on valences (1, 1, 4, 2, 2) and the determinant pattern
    # tabulated next to it (a1 a2 a3 b3 a4 b4 b2 a5 b5 b1)
    vals = (1, 1, 4, 2, 2)
    alpha = ValencedLinkPattern.from_links(vals, [(1, 3), (2, 3), (3, 4), (3, 5), (4, 5)])
    iota = unfuse(alpha)
    assert iota == LinkPattern(((1, 4), (2, 3), (5, 10), (6, 7), (8, 9)))
    beta = LinkPattern(((1, 10), (2, 7), (3, 4), (5, 6), (8, 9)))
    assert fused_geq(beta, iota, vals)
    assert dp_geq(beta, iota)


@pytest.mark.parametrize("vals", SMALL_VALENCES)
def test_unfuse_injective_without_inner_links(vals):
    q = cumulative(vals)
    group = {i: j for j in range(len(vals)) for i in range(q[j] + 1, q[j + 1] + 1)}
    pats = enumerate_valenced(vals)
    images = [unfuse(a) for a in pats]
    assert len(set(images)) == len(images)
    for a, b in zip(pats, images):
        assert all(group[x] != group[y] for x, y in b.links)
        assert fuse(b, vals) == a


def test_compare_examples():
    for order in ("DP", "fused"):
        assert compare(RAINBOW2, RAINBOW2, order, valences=(2, 2))
    assert compare(RAINBOW2, PAIRS2)
    assert not compare(PAIRS2, RAINBOW2)
    assert RAINBOW2.dyck_path == (0, 1, 2, 1, 0)
    assert PAIRS2.dyck_path == (0, 1, 0, 1, 0)
    assert not compare(PAIRS2, RAINBOW2, "fused", valences=(2, 2))


@pytest.mark.parametrize("n, vals", [(3, (2, 2, 2)), (3, (1, 2, 2, 1)), (4, (2, 2, 2, 2)),
                                     (4, (1, 3, 3, 1)), (4, (1,) * 8)])
def test_orders_are_partial_orders(n, vals):
    pats = enumerate_link_patterns(n)
    for rel in (dp_geq, lambda b, a: fused_geq(b, a, vals)):
        for a in pats:
            assert rel(a, a)
        for a, b in itertools.product(pats, repeat=2):
            if a != b and rel(a, b):
                assert not rel(b, a)
        for a, b, c in itertools.product(pats, repeat=3):
            if rel(a, b) and rel(b, c):
                assert rel(a, c)
        for a, b in itertools.product(pats, repeat=2):
            if fused_geq(b, a, vals):
                assert dp_geq(b, a)


def test_count_tilings_trivial_cases():
    for n in range(1, 5):
        for a in enumerate_link_patterns(n):
            assert count_tilings(a, a) == 1
    assert count_tilings(RAINBOW2, PAIRS2) == 0


def test_count_tilings_small_values():
    # both N = 2 skew shapes are empty or a single box
    assert count_tilings(PAIRS2, RAINBOW2) == 1
    # N = 3: from the lowest path every higher one has at least one tiling
    low = LinkPattern(((1, 2), (3, 4), (5, 6)))
    assert all(count_tilings(low, b) >= 1 for b in enumerate_link_patterns(3))


@pytest.mark.parametrize("vals", [(2, 2, 2), (1, 2, 2, 1), (2, 1, 1), (2, 2, 2, 2), (1, 3, 3, 1),
                                  (2, 1, 2, 1, 2), (1, 1, 2, 2, 1, 1)])
def test_tiling_count_constant_on_fused_classes(vals):
    n = sum(vals) // 2
    images = [unfuse(a) for a in enumerate_valenced(vals)]
    for gamma in images:
        for alpha in images:
            if not dp_geq(alpha, gamma):
                continue
            ref = count_tilings(gamma, alpha)
            for beta in enumerate_link_patterns(n):
                if fused_geq(beta, alpha, vals):
                    assert count_tilings(gamma, beta) == ref


def test_factorial_det_examples():
    assert factorial_det("A", 2, 1) == ExactScalar(Fraction(1, 2))
    assert factorial_det("B", 1, 0) == ExactScalar(1)
    assert factorial_det("A", 3, 2) == ExactScalar(det_exact(factorial_matrix("A", 3, 2)))
    assert factorial_det("B", 2, 1) == ExactScalar(det_exact(factorial_matrix("B", 2, 1)))


@pytest.mark.parametrize("s", range(1, 6))
def test_factorial_det_variant_a(s):
    for sp in range(1, s + 1):
        assert factorial_det("A", s, sp).coefficient == det_exact(factorial_matrix("A", s, sp))


@pytest.mark.parametrize("m", range(1, 6))
def test_factorial_det_variant_b(m):
    for t in range(-1, 5):
        assert factorial_det("B", m, t).coefficient == det_exact(factorial_matrix("B", m, t))


def test_factorial_det_preconditions():
    with pytest.raises(ValueError):
        factorial_det("A", 1, 2)
    with pytest.raises(ValueError):
        factorial_det("B", 2, -2)
    with pytest.raises(ValueError):
        factorial_det("C", 1, 1)


def test_json_serialisation():
    assert RAINBOW2.to_json() == "[[1, 4], [2, 3]]"
    (double,) = enumerate_valenced((2, 2))
    assert double.to_json() == "[[1, 2], [1, 2]]"
