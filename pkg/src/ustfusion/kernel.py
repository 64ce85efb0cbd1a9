"""Brownian excursion kernel of the half-plane, its fused version, and Möbius maps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from gmpy2 import mpq

from .combinat import cumulative
from .exactnum import ExactScalar, Jet, MonomialTable, jet_of_power, to_fraction, to_mpq

__all__ = [
    "BoundaryConfig",
    "KernelMatrix",
    "MobiusMap",
    "excursion_derivative",
    "build_fused_kernel",
    "build_kernel",
    "mobius_transport",
    "covariance_factor",
]


@dataclass(frozen=True)
class BoundaryConfig:
    """Ordered boundary points ``x_1 < ... < x_d`` of the real line with valences."""

    points: tuple
    valences: tuple

    def __post_init__(self):
        pts = tuple(to_fraction(p) for p in self.points)
        vals = tuple(int(s) for s in self.valences)
        if len(pts) != len(vals):
            raise ValueError("points and valences differ in length")
        if any(s < 1 for s in vals) or sum(vals) % 2:
            raise ValueError(f"invalid valences {vals}")
        if any(a >= b for a, b in zip(pts, pts[1:])):
            raise ValueError("points must be strictly increasing")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "valences", vals)

    @classmethod
    def unfused(cls, points):
        return cls(tuple(points), (1,) * len(points))

    @property
    def d(self) -> int:
        return len(self.points)

    @property
    def n_links(self) -> int:
        return sum(self.valences) // 2

    @property
    def q(self) -> tuple[int, ...]:
        return cumulative(self.valences)

    def index_info(self, a: int) -> tuple[int, int]:
        """Group ``j`` (zero-based) and position ``m`` (one-based) of index ``a``."""
        q = self.q
        for j in range(self.d):
            if a <= q[j + 1]:
                return j, a - q[j]
        raise IndexError(a)

    def to_dict(self) -> dict:
        return {"points": [str(p) for p in self.points], "valences": list(self.valences)}


def excursion_derivative(m1: int, m2: int, x, y) -> ExactScalar:
    """``d_y^m2 d_x^m1`` of ``1 / (pi (x - y)^2)``."""
    x, y = to_fraction(x), to_fraction(y)
    if x == y:
        raise ZeroDivisionError("coincident boundary points")
    p = m1 + m2 + 2
    return ExactScalar((-1) ** m2 * math.factorial(p - 1) / (y - x) ** p, -1)


@dataclass
class KernelMatrix:
    """Symmetric ``2N x 2N`` kernel with each entry stored as its rational part.

    Every entry equals ``values[a][b] * pi**entry_pi``; diagonal entries are
    unused.  ``groups[a]`` is the fused group of index ``a`` (zero-based).
    ``kind`` is ``"continuum"``, ``"discrete"`` or ``"formal"``.
    """

    values: list
    groups: tuple
    entry_pi: int = 0
    kind: str = "continuum"
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.values)

    def entry(self, a: int, b: int):
        """One-based entry access with the pi power attached."""
        v = self.values[a - 1][b - 1]
        if isinstance(v, Jet):
            return Jet(v.table, v.order, v.c, v.pi_power + self.entry_pi)
        if self.kind == "formal":
            return v
        return ExactScalar(Fraction(int(v.numerator), int(v.denominator)), self.entry_pi)

    def copy(self) -> "KernelMatrix":
        return KernelMatrix([row[:] for row in self.values], self.groups, self.entry_pi,
                            self.kind, dict(self.meta))

    def is_symmetric(self) -> bool:
        n = self.size
        for a in range(n):
            for b in range(a + 1, n):
                u, v = self.values[a][b], self.values[b][a]
                if isinstance(u, Jet):
                    if u.c != v.c:
                        return False
                elif u != v:
                    return False
        return True

    def zero(self):
        v = self.values[0][1] if self.size > 1 else mpq(0)
        if isinstance(v, Jet):
            return Jet(v.table, v.table.order, [mpq(0)] * v.table.size(v.table.order))
        if isinstance(v, float) or type(v).__module__ == "numpy":
            return 0.0
        return 0 if self.kind == "formal" else mpq(0)


def build_kernel(points, orders, groups, jet=None, scale=None) -> KernelMatrix:
    """Continuum kernel with entry ``(a, b)`` equal to the tangential derivative
    ``d_x^orders[a] d_y^orders[b] K(points[a], points[b])`` (times ``scale[a]``
    and ``scale[b]``), and zero when ``a`` and ``b`` share a group.

    ``jet`` is ``(table, variables)`` with ``variables[a]`` the jet variable
    of ``points[a]`` or ``None``.
    """
    n = len(points)
    table, var = jet if jet is not None else (None, None)
    zero = (Jet(table, table.order, [mpq(0)] * table.size(table.order))
            if table is not None else mpq(0))
    values = [[zero] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            if groups[a] == groups[b]:
                continue
            m1, m2 = orders[a], orders[b]
            factor = (-1) ** m2 * math.factorial(m1 + m2 + 1)
            if scale is not None:
                factor = mpq(factor) * scale[a] * scale[b]
            if table is None:
                v = mpq(factor) / (to_mpq(points[b]) - to_mpq(points[a])) ** (m1 + m2 + 2)
            else:
                v = jet_of_power(table, points[a], points[b], m1 + m2 + 2,
                                 xvar=var[a], yvar=var[b], factor=factor)
            values[a][b] = values[b][a] = v
    return KernelMatrix(values, tuple(groups), -1, "continuum",
                        {"points": list(points), "orders": list(orders)})


def build_fused_kernel(cfg: BoundaryConfig, jet_table: MonomialTable | None = None,
                       jet_vars=None) -> KernelMatrix:
    """Fused kernel of a boundary configuration.

    Row ``q_{j-1} + m`` carries ``m - 1`` tangential derivatives at ``x_j``.
    ``jet_vars[j]`` assigns a jet variable to point ``j`` (``None`` = fixed).
    """
    points, orders, groups, var = [], [], [], []
    for j, (x, s) in enumerate(zip(cfg.points, cfg.valences)):
        for m in range(1, s + 1):
            points.append(x)
            orders.append(m - 1)
            groups.append(j)
            var.append(jet_vars[j] if jet_vars is not None else None)
    jet = (jet_table, var) if jet_table is not None else None
    K = build_kernel(points, orders, groups, jet)
    K.meta["valences"] = list(cfg.valences)
    return K


@dataclass(frozen=True)
class MobiusMap:
    """``x -> (a x + b) / (c x + d)`` with ``a d - b c > 0`` (preserves the half-plane)."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, to_fraction(getattr(self, name)))
        if self.a * self.d - self.b * self.c <= 0:
            raise ValueError("Möbius map must have positive determinant")

    @classmethod
    def translation(cls, t):
        return cls(1, t, 0, 1)

    @classmethod
    def scaling(cls, lam):
        return cls(lam, 0, 0, 1)

    def __call__(self, x):
        x = to_fraction(x)
        den = self.c * x + self.d
        if den == 0:
            raise ZeroDivisionError(f"pole of the Möbius map at {x}")
        return (self.a * x + self.b) / den

    def derivative(self, x) -> Fraction:
        x = to_fraction(x)
        den = self.c * x + self.d
        if den == 0:
            raise ZeroDivisionError(f"pole of the Möbius map at {x}")
        return (self.a * self.d - self.b * self.c) / den ** 2


def covariance_factor(points, valences, phi: MobiusMap) -> ExactScalar:
    """``prod_j |phi'(x_j)|^{s_j (s_j + 1) / 2}``."""
    f = Fraction(1)
    for x, s in zip(points, valences):
        f *= abs(phi.derivative(x)) ** (s * (s + 1) // 2)
    return ExactScalar(f)


def mobius_transport(cfg: BoundaryConfig, phi: MobiusMap):
    """Image configuration and covariance prefactor under ``phi``."""
    image = [phi(x) for x in cfg.points]
    if any(u >= v for u, v in zip(image, image[1:])):
        raise ValueError("Möbius map does not preserve the order of the points")
    return BoundaryConfig(tuple(image), cfg.valences), covariance_factor(cfg.points, cfg.valences, phi)
