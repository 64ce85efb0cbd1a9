import math
import random
from fractions import Fraction

import pytest
import sympy
from gmpy2 import mpq

from ustfusion.exactnum import (
    ExactScalar,
    Jet,
    PiMismatch,
    det_exact,
    jet_det,
    jet_of_power,
    monomial_table,
    rank_exact,
    solve_exact,
)


def S(c, k=0):
    return ExactScalar(Fraction(c), k)


def test_scalar_arithmetic():
    assert S(Fraction(1, 2), -1) * S(2, -1) == S(1, -2)
    a = S(Fraction(3, 7), -2)
    assert (a + (-a)).is_zero()
    assert (a + (-a)).pi_power == 0
    assert S(Fraction(3, 4), -2) / S(Fraction(1, 4), -1) == S(3, -1)


def test_scalar_errors():
    with pytest.raises(PiMismatch):
        S(1, -1) + S(1, -2)
    with pytest.raises(ZeroDivisionError):
        S(1) / S(0, 3)
    # zero is compatible with any power of pi
    assert S(0) + S(2, -3) == S(2, -3)


def test_scalar_float_and_dict():
    a = S(Fraction(-5, 3), -2)
    assert float(a) == pytest.approx(-5 / 3 / math.pi ** 2, rel=1e-15)
    assert ExactScalar.from_dict(a.to_dict()) == a
    assert a.to_dict() == {"num": "-5", "den": "3", "pi_pow": -2}
    assert a.sign() == -1


def test_det_exact_matches_sympy():
    rng = random.Random(3)
    for n in range(1, 7):
        m = [[Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(n)] for _ in range(n)]
        assert det_exact(m) == Fraction(str(sympy.Matrix(m).det()))


def test_rank_and_solve():
    m = [[Fraction(1), Fraction(2)], [Fraction(2), Fraction(4)]]
    assert rank_exact(m) == 1
    a = [[Fraction(2), Fraction(1)], [Fraction(1), Fraction(3)]]
    x = solve_exact(a, [[Fraction(1)], [Fraction(2)]])
    assert [sum(r * v[0] for r, v in zip(row, x)) for row in a] == [1, 2]
    with pytest.raises(ZeroDivisionError):
        solve_exact(m, [[Fraction(1)], [Fraction(0)]])


def test_jet_of_power_examples():
    t0 = monomial_table(2, 0)
    assert jet_of_power(t0, 0, 1, 2, xvar=0, yvar=1).value == 1
    t1 = monomial_table(2, 1)
    assert jet_of_power(t1, 0, 1, 2, xvar=0, yvar=1).coefficient((1, 0)) == S(2)
    t2 = monomial_table(2, 2)
    assert jet_of_power(t2, 0, 1, 2, xvar=0, yvar=1).coefficient((0, 2)) == S(3)


@pytest.mark.parametrize("p", [1, 2, 3, 5])
def test_jet_of_power_closed_form(p):
    x0, y0 = Fraction(-2, 3), Fraction(5, 4)
    table = monomial_table(2, 6)
    J = jet_of_power(table, x0, y0, p, xvar=0, yvar=1)
    for k in range(7):
        mag = Fraction(math.factorial(p + k - 1), math.factorial(p - 1) * math.factorial(k)) / (y0 - x0) ** (p + k)
        assert J.coefficient((k, 0)).coefficient == mag
        assert J.coefficient((0, k)).coefficient == (-1) ** k * mag


def test_jet_of_power_coincident_points():
    with pytest.raises(ZeroDivisionError):
        jet_of_power(monomial_table(1, 1), 1, 1, 2, xvar=0)


def _random_jet(table, rng):
    c = [mpq(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(table.size(table.order))]
    return Jet(table, table.order, c)


@pytest.mark.parametrize("n, order", [(1, 4), (2, 3), (3, 4)])
def test_jet_ring_laws(n, order):
    rng = random.Random(n * 10 + order)
    table = monomial_table(n, order)
    for _ in range(3):
        a, b, c = (_random_jet(table, rng) for _ in range(3))
        assert ((a * b) * c).c == (a * (b * c)).c
        assert (a * (b + c)).c == (a * b + a * c).c
        assert (a * b).c == (b * a).c


def test_jet_product_rule_and_diff():
    table = monomial_table(2, 3)
    x = Jet.variable(table, 0, 2)
    y = Jet.variable(table, 1, 3)
    f = x * x * y       # x^2 y at (2, 3)
    assert f.value == 12
    assert f.derivative_value((1, 0)) == S(12)
    assert f.derivative_value((2, 1)) == S(2)
    assert f.diff(0).diff(0).value == 6


def test_jet_diff_exhausts_order():
    table = monomial_table(1, 1)
    j = Jet.variable(table, 0, 1)
    with pytest.raises(ValueError):
        j.diff(0).diff(0)


def test_jet_det_small():
    table = monomial_table(1, 2)
    a = _random_jet(table, random.Random(0))
    assert jet_det([[a]]) is a
    vals = [[Jet.constant(table, v) for v in row] for row in ([2, 3], [5, 7])]
    d = jet_det(vals)
    assert d.value == -1
    assert not any(d.c[1:])


def test_jet_det_first_derivative_vs_difference_quotient():
    # 2x2 determinant of (y - x)^-2 entries; x_1 moves, everything else fixed
    xs = [Fraction(0), Fraction(1, 3)]
    ys = [Fraction(2), Fraction(7, 2)]
    table = monomial_table(1, 1)

    def exact(x1):
        pts = [x1, xs[1]]
        return det_exact([[1 / (y - x) ** 2 for y in ys] for x in pts])

    rows = [[jet_of_power(table, xs[i], y, 2, xvar=0 if i == 0 else None) for y in ys] for i in range(2)]
    deriv = jet_det(rows).coefficient((1,)).coefficient
    h = Fraction(1, 10**6)
    central = (exact(xs[0] + h) - exact(xs[0] - h)) / (2 * h)
    assert abs(central - deriv) < Fraction(1, 10**9)
    assert jet_det(rows).value == exact(xs[0])
