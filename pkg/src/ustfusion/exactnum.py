"""Exact scalars (rational times a power of pi) and truncated multivariate jets.

Every quantity in the continuum theory is a rational number times an integer
power of pi, so pi is carried as an exponent and never evaluated until a value
is rendered.  Jets are truncated Taylor expansions with such coefficients; they
let the PDE checks differentiate determinants exactly.

Heavy inner loops use :class:`gmpy2.mpq`; the public scalar type stores a
:class:`fractions.Fraction`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cache, reduce

import gmpy2
import mpmath
from gmpy2 import mpq, mpz

__all__ = [
    "ExactScalar",
    "to_fraction",
    "to_mpq",
    "det_exact",
    "rank_exact",
    "solve_exact",
    "MonomialTable",
    "monomial_table",
    "Jet",
    "jet_of_power",
    "jet_det",
    "PiMismatch",
]


class PiMismatch(ValueError):
    """Raised when adding scalars that carry different powers of pi."""


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        raise TypeError("floats are not exact; pass a rational or a string")
    return Fraction(int(x.numerator), int(x.denominator))


def to_mpq(x) -> mpq:
    if isinstance(x, str):
        x = Fraction(x)
    return mpq(int(x.numerator), int(x.denominator)) if not isinstance(x, int) else mpq(x)


@dataclass(frozen=True)
class ExactScalar:
    """The number ``coefficient * pi**pi_power``."""

    coefficient: Fraction
    pi_power: int = 0

    def __post_init__(self):
        c = to_fraction(self.coefficient)
        object.__setattr__(self, "coefficient", c)
        object.__setattr__(self, "pi_power", int(self.pi_power) if c else 0)

    @classmethod
    def zero(cls):
        return cls(Fraction(0), 0)

    def is_zero(self) -> bool:
        return self.coefficient == 0

    def _coerce(self, other):
        if isinstance(other, ExactScalar):
            return other
        return ExactScalar(to_fraction(other), 0)

    def _check_pi(self, other):
        if self.coefficient and other.coefficient and self.pi_power != other.pi_power:
            raise PiMismatch(f"pi^{self.pi_power} + pi^{other.pi_power}")
        return self.pi_power if self.coefficient else other.pi_power

    def __add__(self, other):
        other = self._coerce(other)
        p = self._check_pi(other)
        return ExactScalar(self.coefficient + other.coefficient, p)

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar(-self.coefficient, self.pi_power)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        return ExactScalar(self.coefficient * other.coefficient, self.pi_power + other.pi_power)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if not other.coefficient:
            raise ZeroDivisionError("division by an exact zero")
        return ExactScalar(self.coefficient / other.coefficient, self.pi_power - other.pi_power)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, k: int):
        return ExactScalar(self.coefficient ** k, self.pi_power * k)

    def __eq__(self, other):
        if not isinstance(other, ExactScalar):
            try:
                other = self._coerce(other)
            except TypeError:
                return NotImplemented
        if self.coefficient == 0 or other.coefficient == 0:
            return self.coefficient == other.coefficient
        return self.coefficient == other.coefficient and self.pi_power == other.pi_power

    def __hash__(self):
        return hash((self.coefficient, self.pi_power))

    def sign(self) -> int:
        return (self.coefficient > 0) - (self.coefficient < 0)

    def to_mpf(self, dps: int = 30):
        with mpmath.workdps(dps):
            c = mpmath.mpf(self.coefficient.numerator) / self.coefficient.denominator
            return c * mpmath.pi ** self.pi_power

    def __float__(self):
        return float(self.to_mpf())

    def decimal(self, digits: int = 17) -> str:
        return mpmath.nstr(self.to_mpf(digits + 10), digits)

    def to_dict(self) -> dict:
        return {"num": str(self.coefficient.numerator), "den": str(self.coefficient.denominator),
                "pi_pow": self.pi_power}

    @classmethod
    def from_dict(cls, d) -> "ExactScalar":
        return cls(Fraction(int(d["num"]), int(d["den"])), int(d.get("pi_pow", 0)))

    def __repr__(self):
        return f"ExactScalar({self.coefficient}, pi^{self.pi_power})"

    def __str__(self):
        if self.pi_power == 0 or not self.coefficient:
            return str(self.coefficient)
        return f"{self.coefficient}*pi^{self.pi_power}"


# --- exact linear algebra --------------------------------------------------

def _integer_rows(matrix):
    """Scale each row to integers; return (int rows, product of scale factors)."""
    rows, scale = [], mpz(1)
    for row in matrix:
        qs = [to_mpq(v) for v in row]
        den = reduce(gmpy2.lcm, (v.denominator for v in qs), mpz(1))
        rows.append([v.numerator * (den // v.denominator) for v in qs])
        scale *= den
    return rows, scale


def det_exact(matrix) -> Fraction:
    """Determinant of a rational matrix by fraction-free (Bareiss) elimination."""
    n = len(matrix)
    if n == 0:
        return Fraction(1)
    a, scale = _integer_rows(matrix)
    sign, prev = 1, mpz(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            piv = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if piv is None:
                return Fraction(0)
            a[k], a[piv] = a[piv], a[k]
            sign = -sign
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
            row_i[k] = mpz(0)
        prev = akk
    num = sign * a[n - 1][n - 1]
    return Fraction(int(num), int(scale))


def _row_reduce(rows, ncols):
    """In-place Gauss-Jordan over mpq; returns pivot columns."""
    pivots, r = [], 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = 1 / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return pivots


def rank_exact(matrix) -> int:
    rows = [[to_mpq(v) for v in row] for row in matrix]
    if not rows:
        return 0
    return len(_row_reduce(rows, len(rows[0])))


def solve_exact(a, b):
    """Solve ``a X = b`` exactly for square nonsingular ``a``; ``b`` is a matrix."""
    n = len(a)
    rows = [[to_mpq(v) for v in a[i]] + [to_mpq(v) for v in b[i]] for i in range(n)]
    piv = _row_reduce(rows, n)
    if piv != list(range(n)):
        raise ZeroDivisionError("singular system")
    return [[Fraction(int(v.numerator), int(v.denominator)) for v in row[n:]] for row in rows]


# --- jets ---------------------------------------------------------------------

class MonomialTable:
    """Graded monomial basis in ``n`` variables up to total degree ``order``.

    Monomials are sorted by total degree, so the monomials of degree at most
    ``k`` form a prefix of length ``prefix[k]``.
    """

    def __init__(self, n: int, order: int):
        self.n, self.order = n, order
        exps = []
        for deg in range(order + 1):
            layer = [e for e in itertools.product(range(deg + 1), repeat=n) if sum(e) == deg]
            exps.extend(sorted(layer, reverse=True))
        if n == 0:
            exps = [()]
        self.exps = exps
        self.index = {e: i for i, e in enumerate(exps)}
        self.degree = [sum(e) for e in exps]
        self.prefix = [sum(1 for d in self.degree if d <= k) for k in range(order + 1)]
        self.mul = []
        for e in exps:
            room = order - sum(e)
            self.mul.append([self.index[tuple(a + b for a, b in zip(e, f))]
                             for f in exps[: self.prefix[room]]])
        self.deriv = []
        for v in range(n):
            table = []
            for e in exps[: self.prefix[order - 1]] if order > 0 else []:
                up = list(e)
                up[v] += 1
                table.append((self.index[tuple(up)], e[v] + 1))
            self.deriv.append(table)

    def size(self, order: int) -> int:
        return self.prefix[order]


@cache
def monomial_table(n: int, order: int) -> MonomialTable:
    return MonomialTable(n, order)


class Jet:
    """Truncated Taylor expansion ``sum c_mu dx^mu`` times ``pi**pi_power``.

    ``order`` is the highest total degree that is still exact; coefficients
    are Taylor coefficients (derivatives divided by factorials).
    """

    __slots__ = ("table", "order", "c", "pi_power")

    def __init__(self, table: MonomialTable, order: int, coeffs, pi_power: int = 0):
        self.table, self.order = table, order
        self.c = coeffs
        self.pi_power = pi_power

    @classmethod
    def constant(cls, table, value, order=None, pi_power=0):
        order = table.order if order is None else order
        c = [mpq(0)] * table.size(order)
        c[0] = to_mpq(value)
        return cls(table, order, c, pi_power)

    @classmethod
    def variable(cls, table, v, value, order=None):
        order = table.order if order is None else order
        j = cls.constant(table, value, order)
        if order >= 1:
            e = [0] * table.n
            e[v] = 1
            j.c[table.index[tuple(e)]] = mpq(1)
        return j

    @property
    def value(self):
        return self.c[0]

    def scalar(self) -> ExactScalar:
        v = self.c[0]
        return ExactScalar(Fraction(int(v.numerator), int(v.denominator)), self.pi_power)

    def coefficient(self, exps) -> ExactScalar:
        v = self.c[self.table.index[tuple(exps)]]
        return ExactScalar(Fraction(int(v.numerator), int(v.denominator)), self.pi_power)

    def derivative_value(self, exps) -> ExactScalar:
        """Partial derivative ``d^exps`` at the base point."""
        return self.coefficient(exps) * math.prod(math.factorial(k) for k in exps)

    def _pi(self, other):
        if self.pi_power == other.pi_power:
            return self.pi_power
        if not any(self.c):
            return other.pi_power
        if not any(other.c):
            return self.pi_power
        raise PiMismatch(f"pi^{self.pi_power} + pi^{other.pi_power}")

    def __add__(self, other):
        if not isinstance(other, Jet):
            other = Jet.constant(self.table, other, self.order, self.pi_power)
        o = min(self.order, other.order)
        size = self.table.size(o)
        return Jet(self.table, o, [a + b for a, b in zip(self.c[:size], other.c[:size])],
                   self._pi(other))

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.table, self.order, [-a for a in self.c], self.pi_power)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, k, pi_shift: int = 0):
        k = to_mpq(k)
        return Jet(self.table, self.order, [k * a for a in self.c], self.pi_power + pi_shift)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return self.scale(other)
        t = self.table
        o = min(self.order, other.order)
        size = t.size(o)
        out = [mpq(0)] * size
        b = other.c
        prefix, degree, mul = t.prefix, t.degree, t.mul
        for i in range(size):
            ai = self.c[i]
            if not ai:
                continue
            targets = mul[i]
            for k in range(prefix[o - degree[i]]):
                bk = b[k]
                if bk:
                    out[targets[k]] += ai * bk
        return Jet(t, o, out, self.pi_power + other.pi_power)

    __rmul__ = __mul__

    def diff(self, v: int) -> "Jet":
        if self.order < 1:
            raise ValueError("jet order exhausted")
        o = self.order - 1
        tab = self.table.deriv[v]
        return Jet(self.table, o, [f * self.c[src] for src, f in tab[: self.table.size(o)]],
                   self.pi_power)

    def truncate(self, order: int) -> "Jet":
        order = min(order, self.order)
        return Jet(self.table, order, self.c[: self.table.size(order)], self.pi_power)

    def is_zero(self) -> bool:
        return not any(self.c)

    def __repr__(self):
        return f"Jet(n={self.table.n}, order={self.order}, value={self.c[0]}, pi^{self.pi_power})"


def _power_series(u, p: int, order: int):
    """Taylor coefficients of ``(u + t)**(-p)`` in ``t`` up to ``t**order``."""
    u = to_mpq(u)
    out, coeff = [], mpq(1)
    upow = 1 / u ** p
    for a in range(order + 1):
        out.append(coeff * upow)
        coeff = coeff * (-(p + a)) / (a + 1)
        upow /= u
    return out


def jet_of_power(table: MonomialTable, x0, y0, p: int, xvar=None, yvar=None,
                 order=None, factor=1, pi_power=0) -> Jet:
    """Jet of ``factor * (y - x)**(-p)`` at ``(x0, y0)``.

    ``xvar`` / ``yvar`` are the jet variables of ``x`` and ``y`` (``None`` when
    that argument is held fixed).
    """
    x0, y0 = to_mpq(x0), to_mpq(y0)
    if x0 == y0:
        raise ZeroDivisionError("coincident base points")
    order = table.order if order is None else order
    u = y0 - x0
    series = _power_series(u, p, order)   # in powers of (dy - dx)
    fac = to_mpq(factor)
    c = [mpq(0)] * table.size(order)
    n = table.n
    for a in range(order + 1):         # power of dx
        if a and xvar is None:
            break
        for b in range(order + 1 - a):   # power of dy
            if b and yvar is None:
                break
            e = [0] * n
            if xvar is not None:
                e[xvar] += a
            if yvar is not None:
                e[yvar] += b
            term = series[a + b] * math.comb(a + b, a) * (-1) ** a * fac
            c[table.index[tuple(e)]] += term
    return Jet(table, order, c, pi_power)


def jet_det(matrix) -> Jet:
    """Determinant of a square matrix of jets by memoised Laplace expansion."""
    n = len(matrix)
    if n == 0:
        raise ValueError("empty matrix")
    if n == 1:
        return matrix[0][0]
    # minors[cols] = det of the last len(cols) rows restricted to cols
    minors = {(c,): matrix[n - 1][c] for c in range(n)}
    for k in range(2, n + 1):
        row = matrix[n - k]
        nxt = {}
        for cols in itertools.combinations(range(n), k):
            acc = None
            for pos, c in enumerate(cols):
                entry = row[c]
                if entry.is_zero():
                    continue
                rest = cols[:pos] + cols[pos + 1:]
                minor = minors[rest]
                if minor.is_zero():
                    continue
                term = entry * minor
                if pos % 2:
                    term = -term
                acc = term if acc is None else acc + term
            if acc is None:
                first = row[cols[0]]
                acc = Jet(first.table, first.order, [mpq(0)] * first.table.size(first.order),
                          first.pi_power * k)
            nxt[cols] = acc
        minors = nxt
    return minors[tuple(range(n))]
