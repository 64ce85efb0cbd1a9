import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest

from ustfusion.cft import (
    BpzOperator,
    asy_check,
    asy_measure,
    asy_predict,
    bpz_apply,
    covariance_check,
    frobenius_probe,
    fusion_limit_check,
    partition_jets,
    pde_residual,
    random_chamber_points,
    second_order_bpz,
)
from ustfusion.combinat import LinkPattern, ValencedLinkPattern, enumerate_valenced
from ustfusion.exactnum import ExactScalar, Jet, jet_of_power, monomial_table
from ustfusion.fomin import pure_partition
from ustfusion.kernel import BoundaryConfig, MobiusMap


def _difference_product(points, exps, variables, order):
    """Jet of ``prod_{i<k} (x_k - x_i)^(-exps[i, k])`` (translation invariant)."""
    n = sum(v is not None for v in variables)
    table = monomial_table(n, order)
    out = Jet.constant(table, 1)
    for (i, k), p in exps.items():
        out = out * jet_of_power(table, points[i], points[k], p, xvar=variables[i], yvar=variables[k])
    return out


def test_operator_terms_second_order():
    assert dict(BpzOperator(0, (1, 1)).terms) == {(2,): -2, (1, 1): 1}
    assert BpzOperator(2, (1, 1, 3)).order == 4
    assert BpzOperator(1, (1, 3, 2)).weight(2) == 3


def test_operator_on_constants():
    table = monomial_table(0, 2)
    assert bpz_apply(BpzOperator(0, (1,)), Jet.constant(table, 3), [0]).is_zero()
    # one other point: only L_{-2} contributes, giving -2 h c / (x_1 - x_0)^2
    table = monomial_table(1, 2)
    val = bpz_apply(BpzOperator(0, (1, 2)), Jet.constant(table, 3), [0, 2])
    assert val == ExactScalar(Fraction(-2 * 3 * 3, 4))


def test_operator_needs_enough_order():
    cfg_pts = [0, 1]
    jets = partition_jets(BoundaryConfig(tuple(cfg_pts), (1, 1)), 1, 0)
    with pytest.raises(ValueError):
        bpz_apply(BpzOperator(0, (1, 1)), next(iter(jets.values())), cfg_pts)


@pytest.mark.parametrize("seed", range(6))
def test_second_order_forms_agree(seed):
    rng = random.Random(seed)
    d = rng.randint(2, 4)
    pts = sorted(Fraction(rng.randint(-50, 50), 7) for _ in range(d))
    if len(set(pts)) < d:
        pts = [Fraction(k) for k in range(d)]
    exps = {(i, k): rng.randint(0, 3) for i in range(d) for k in range(i + 1, d)}
    vals = tuple(rng.choice([1, 2, 3]) for _ in range(d))
    j = rng.randrange(d)
    vals = vals[:j] + (1,) + vals[j + 1:]
    full = _difference_product(pts, exps, list(range(d)), 2)
    reduced_vars = [None if i == j else (i if i < j else i - 1) for i in range(d)]
    reduced = _difference_product(pts, exps, reduced_vars, 2)
    assert bpz_apply(BpzOperator(j, vals), reduced, pts) == second_order_bpz(full, j, vals, pts)


def test_pde_examples():
    assert pde_residual(ValencedLinkPattern.from_links((1, 1), [(1, 2)]), (1, 1), (Fraction(-1, 3), Fraction(5, 2)), 0).is_zero()
    (w,) = enumerate_valenced((1, 1, 1, 3))
    assert pde_residual(w, (1, 1, 1, 3), (0, Fraction(1, 2), 2, 7), 3).is_zero()
    (double,) = enumerate_valenced((2, 2))
    for j in (0, 1):
        assert pde_residual(double, (2, 2), (Fraction(1, 3), 4), j).is_zero()


@pytest.mark.parametrize("vals", [(1, 1, 1, 1), (2, 1, 1), (1, 2, 1), (3, 3), (1, 2, 3), (3, 1, 1, 1)])
def test_pde_all_points(vals):
    rng = np.random.default_rng(sum(vals) * 7 + len(vals))
    for _ in range(2):
        pts = random_chamber_points(len(vals), rng)
        cfg = BoundaryConfig(tuple(pts), vals)
        for j in range(len(vals)):
            jets = partition_jets(cfg, vals[j] + 1, j)
            for alpha in enumerate_valenced(vals):
                assert pde_residual(alpha, vals, pts, j, jets).is_zero()


def test_pde_negative_control():
    """A function outside the solution space leaves a nonzero residual."""
    pts = (Fraction(0), Fraction(1), Fraction(3), Fraction(4))
    vals = (1, 1, 1, 1)
    cfg = BoundaryConfig(pts, vals)
    jets = partition_jets(cfg, 2, 0)
    alpha = enumerate_valenced(vals)[0]
    z = jets[alpha]
    # multiply by (x_3 - x_2)^-1, a translation-invariant perturbation
    bump = jet_of_power(z.table, pts[1], pts[2], 1, xvar=0, yvar=1)
    assert not bpz_apply(BpzOperator(0, vals), z * bump, pts).is_zero()
    # wrong weight: treating the other points as valence 2
    assert not bpz_apply(BpzOperator(0, (1, 2, 2, 2)), z, pts).is_zero()


def test_covariance_examples():
    pts = (Fraction(1, 3), Fraction(1), Fraction(5, 2), Fraction(4))
    for vals in [(1, 1, 1, 1), (2, 1, 1, 2), (1, 3, 1, 1)]:
        for alpha in enumerate_valenced(vals):
            for phi in (MobiusMap(1, 0, 0, 1), MobiusMap.translation(Fraction(-2, 7)),
                        MobiusMap.scaling(2), MobiusMap(1, 0, 1, 1)):
                assert covariance_check(alpha, vals, pts, phi).is_zero()


def test_covariance_rejects_order_flip():
    with pytest.raises(ValueError):
        covariance_check([(1, 2)], (1, 1), (-2, 2), MobiusMap(1, 0, -1, 1))


def test_fusion_limit_trivial_group():
    alpha = enumerate_valenced((2, 1, 1))[0]
    out = fusion_limit_check(alpha, (0, 1, 3), 1, [Fraction(1, 8)])
    assert out["exact_match"]


def test_fusion_limit_first_order():
    alpha = enumerate_valenced((2, 1, 1))[0]
    eps = [Fraction(1, 2 ** k) for k in range(6, 12)]
    out = fusion_limit_check(alpha, (0, 1, 3), 0, eps, mode="simultaneous")
    errs = [r["relative_error"] for r in out["rows"]]
    assert errs == sorted(errs, reverse=True)
    assert out["order"] == pytest.approx(1.0, abs=0.02)
    it = fusion_limit_check(alpha, (0, 1, 3), 0, eps, mode="iterated")
    assert it["rows"][-1]["relative_error"] < 0.02


def test_fusion_limit_simultaneous_offsets():
    """Any offsets reproduce the same constant after dividing by their Vandermonde."""
    (alpha,) = [a for a in enumerate_valenced((3, 1, 1, 1))]
    eps = [Fraction(1, 10 ** k) for k in range(3, 6)]
    for offsets in [(0, 1, 2), (0, 2, 5), (0, Fraction(1, 3), 1)]:
        out = fusion_limit_check(alpha, (0, 2, 3, 5), 0, eps, mode="simultaneous", offsets=offsets)
        assert out["constant"] == 2
        assert out["rows"][-1]["relative_error"] < 1e-4


def test_asy_predict_examples():
    assert asy_predict(1, 1, 0) == (1, ExactScalar(1))
    assert asy_predict(1, 1, 1)[0] == -2
    assert asy_predict(2, 1, 1) == (2 - 7 + 2, ExactScalar(2, -1))
    assert asy_predict(3, 2, 1)[1] is None
    with pytest.raises(ValueError):
        asy_predict(2, 1, 2)


def test_asy_exponent_symmetric():
    for s in range(1, 5):
        for sp in range(1, 5):
            for m in range(min(s, sp) + 1):
                assert asy_predict(s, sp, m)[0] == asy_predict(sp, s, m)[0]


def test_asy_measure_unfused_pairs():
    pts = (Fraction(0), Fraction(1), Fraction(3), Fraction(7))
    eps = [Fraction(1, 10 ** k) for k in range(6, 9)]
    linked = ValencedLinkPattern.from_links((1, 1, 1, 1), [(1, 2), (3, 4)])
    out = asy_measure(linked, pts, 0, eps)
    assert abs(out["exponent"] + 2) < 0.01
    # the constant carries the pi factor: 1 / pi
    assert float(abs(out["constant"] * mpmath.pi - 1)) < 1e-6 and out["constant_pi_power"] == -1
    unlinked = ValencedLinkPattern.from_links((1, 1, 1, 1), [(1, 4), (2, 3)])
    out = asy_measure(unlinked, pts, 0, eps)
    assert abs(out["exponent"] - 1) < 0.01
    assert float(abs(out["constant"] - 1)) < 1e-6


@pytest.mark.parametrize("s, sp, m", [(2, 1, 1), (2, 1, 0), (2, 2, 2), (3, 2, 0), (3, 2, 1)])
def test_asy_check_fused(s, sp, m):
    out = asy_check(s, sp, m)
    assert out["exponent_error"] < 0.01
    if "constant_relative_error" in out:
        assert out["constant_relative_error"] < 1e-6


def test_frobenius_exponents():
    pts = [Fraction(0), Fraction(2), Fraction(5), Fraction(6)]
    eps = [Fraction(1, 10 ** k) for k in range(6, 9)]
    vals = (2, 1, 1, 2)
    by_count = {a.count(1, 2): a for a in enumerate_valenced(vals)}

    def handle(alpha):
        return lambda p: pure_partition(alpha, BoundaryConfig(tuple(p), vals)).value

    assert abs(frobenius_probe(handle(by_count[1]), pts, 0, eps)["exponent"] + 3) < 0.01
    assert abs(frobenius_probe(handle(by_count[0]), pts, 0, eps)["exponent"] - 2) < 0.01
    assert frobenius_probe(lambda p: ExactScalar(0), pts, 0, eps)["zero"]


def test_random_chamber_points_sorted():
    rng = np.random.default_rng(0)
    for d in range(1, 7):
        pts = random_chamber_points(d, rng)
        assert len(pts) == d and all(a < b for a, b in zip(pts, pts[1:]))


def test_link_pattern_input_accepted():
    pts = (0, 1, 2, 4)
    assert pde_residual(LinkPattern(((1, 4), (2, 3))), (1, 1, 1, 1), pts, 1).is_zero()
