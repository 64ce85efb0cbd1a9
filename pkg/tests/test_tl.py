import random
from fractions import Fraction

import pytest

from ustfusion.combinat import LinkPattern, enumerate_link_patterns, enumerate_valenced, unfuse
from ustfusion.fomin import pure_partition
from ustfusion.kernel import BoundaryConfig
from ustfusion.tl import (
    FunctionVector,
    act_e,
    act_transposition,
    e_element,
    element_matrix,
    fusion_prefactor,
    jw_element,
    project_jw,
    psi_fuse,
    random_points,
    superfactorial,
    tl_relation_suite,
    valenced_action_matrix,
)


def _failures(results):
    return [r for r in results if not r["holds"] and not r.get("informational")]


@pytest.mark.parametrize("n_links, valences", [(1, []), (2, [(2, 2), (2, 1, 1), (1, 2, 1)]),
                                               (3, [(3, 3), (2, 2, 2), (1, 3, 2), (2, 1, 1, 2)])])
def test_relation_suite_holds(n_links, valences):
    res = tl_relation_suite(n_links, valences, n_points=6, seed=n_links)
    assert res and not _failures(res)


def test_shifted_convention_breaks_cubic_relation():
    res = tl_relation_suite(3, n_points=4, convention="tau-1")
    broken = {r["relation"] for r in res if not r["holds"]}
    assert "e_i e_{i+1} e_i = e_i" in broken
    assert "e_i^2 = -2 e_i" not in broken


def test_literal_fusion_identity_only_fails_with_prefactor():
    res = tl_relation_suite(3, [(3, 3), (2, 2, 2)], n_points=4)
    for r in res:
        if r["relation"] == "psi(Z_iota(alpha)) = Z_alpha":
            # the prefactor is 1 exactly when every group has at most two points
            assert r["holds"] == (not r["informational"])


def test_superfactorials():
    assert [superfactorial(s) for s in range(1, 6)] == [1, 1, 2, 12, 288]
    assert fusion_prefactor((3, 1, 2)) == 2
    assert fusion_prefactor((3, 3)) == 4


def test_transposition_swaps_arguments():
    rng = random.Random(3)
    F = FunctionVector(2, (2, -5))
    G = act_transposition(2, F)
    for _ in range(5):
        x = random_points(4, rng)
        swapped = (x[0], x[2], x[1], x[3])
        assert G.raw(x) == F.raw(swapped)
        assert act_transposition(2, F.as_handle()).raw(x) == G.raw(x)


def test_handle_and_basis_agree():
    rng = random.Random(11)
    F = FunctionVector(3, tuple(rng.randint(-4, 4) for _ in range(5)))
    H = F.as_handle()
    for i in range(1, 6):
        a, b = act_e(i, F), act_e(i, H)
        for _ in range(3):
            x = random_points(6, rng)
            assert a.raw(x) == b.raw(x)


def test_jones_wenzl_element():
    p = jw_element((3,))
    assert len(p) == 6 and sum(p.values()) == 0
    assert set(p.values()) == {Fraction(1, 6), Fraction(-1, 6)}
    assert jw_element((1, 1)) == {(0, 1): 1}


def test_projector_fixes_pure_partitions():
    for vals in [(2, 2), (2, 1, 1), (3, 1, 2)]:
        for alpha in enumerate_valenced(vals):
            Z = FunctionVector.zfrak(unfuse(alpha))
            assert project_jw(vals, Z) == Z


def test_delta_basis_vectors():
    beta = LinkPattern(((1, 4), (2, 3)))
    v = FunctionVector.delta(beta)
    assert sum(v.coefficients) == 1
    assert v.coefficients[enumerate_link_patterns(2).index(beta)] == 1


def test_invalid_function_vectors():
    with pytest.raises(ValueError):
        FunctionVector(2, (1, 2, 3))
    with pytest.raises(ValueError):
        FunctionVector(2)
    with pytest.raises(ValueError):
        psi_fuse(FunctionVector(2, (1, 0)), (2, 1))


@pytest.mark.parametrize("vals", [(2, 2), (2, 1, 1), (3, 1, 2), (3, 3)])
def test_series_and_quotient_agree(vals):
    rng = random.Random(sum(vals))
    for alpha in enumerate_valenced(vals):
        Z = FunctionVector.zfrak(unfuse(alpha))
        series = psi_fuse(Z, vals)
        quotient = psi_fuse(Z.as_handle(), vals, method="quotient")
        xi = random_points(len(vals), rng, spread=5)
        a, b = float(series.raw(xi)), float(quotient.raw(xi))
        assert b == pytest.approx(a, rel=1e-9)


def test_fusion_is_direction_independent():
    vals = (3, 1, 2)
    rng = random.Random(5)
    xi = random_points(3, rng)
    for alpha in enumerate_valenced(vals):
        Z = FunctionVector.zfrak(unfuse(alpha))
        base = psi_fuse(Z, vals).raw(xi)
        for direction in ([(0, 1, 2), (0,), (0, 1)], [(5, -1, 2), (3,), (Fraction(1, 2), 7)]):
            assert psi_fuse(Z, vals, direction).raw(xi) == base
    with pytest.raises(ValueError):
        psi_fuse(Z, vals, [(0, 0, 1), (0,), (0, 1)]).raw(xi)


def test_fused_values_match_pure_partition():
    rng = random.Random(8)
    for vals in [(2, 1, 1), (2, 2, 2), (1, 3, 2)]:
        for alpha in enumerate_valenced(vals):
            f = psi_fuse(FunctionVector.zfrak(unfuse(alpha)), vals)
            xi = random_points(len(vals), rng)
            z = pure_partition(alpha, BoundaryConfig(xi, vals)).value
            assert fusion_prefactor(vals) * f(xi) == z


def _diagram_action(i, beta):
    """Planar action of ``e_i`` on a link pattern: ``(coefficient, pattern)``."""
    partner = {a: b for a, b in beta.links} | {b: a for a, b in beta.links}
    if partner[i] == i + 1:
        return -2, beta
    a, b = sorted((partner[i], partner[i + 1]))
    links = [l for l in beta.links if i not in l and i + 1 not in l] + [(i, i + 1), (a, b)]
    return 1, LinkPattern(tuple(sorted(links)))


@pytest.mark.parametrize("n_links", [2, 3])
def test_unfused_action_is_dual_to_diagrams(n_links):
    """``e_i Z_alpha = sum_beta [e_i beta : alpha] Z_beta``."""
    vals = (1,) * (2 * n_links)
    pats = enumerate_link_patterns(n_links)
    rng = random.Random(n_links)
    xis = [random_points(2 * n_links, rng) for _ in range(len(pats) + 2)]
    for i in range(1, 2 * n_links):
        A = valenced_action_matrix(vals, e_element(i, 2 * n_links), xis)
        expected = [[0] * len(pats) for _ in pats]
        for g, beta in enumerate(pats):
            c, image = _diagram_action(i, beta)
            expected[g][pats.index(image)] += c
        assert A == expected


def test_fused_action_kills_in_group_caps():
    vals = (2, 1, 1)
    rng = random.Random(1)
    xis = [random_points(3, rng) for _ in range(4)]
    assert valenced_action_matrix(vals, e_element(1, 4), xis) == [[0]]


def test_element_matrix_of_identity():
    m = element_matrix({tuple(range(6)): 1}, 3)
    assert m == [[int(i == j) for j in range(5)] for i in range(5)]
