"""Wired square-grid domains, the Dirichlet Green's function, discrete excursion
kernels and exact UST connection probabilities.

A domain is a ``width x height`` block of interior vertices of ``delta Z^2``;
every lattice edge leaving the block is a boundary edge, and all boundary
vertices are wired together.  Boundary edges are numbered counterclockwise:
bottom side left to right, right side bottom to top, top side right to left,
left side top to bottom.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from importlib import resources

import mpmath
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from gmpy2 import mpq

from .combinat import LinkPattern, ValencedLinkPattern, cumulative, unfuse
from .exactnum import to_fraction
from .fomin import fusion_modify, inverse_fomin_sum, pure_partition
from .kernel import BoundaryConfig, KernelMatrix

__all__ = [
    "GridDomain",
    "green_solve",
    "green_columns",
    "discrete_excursion_kernel",
    "discrete_kernel_matrix",
    "dtan",
    "connection_probability",
    "SquareMap",
    "convergence_series",
    "bundled_domains",
]

_SIDES = ("bottom", "right", "top", "left")


@dataclass(frozen=True)
class GridDomain:
    """Rectangle of ``width x height`` interior vertices at spacing ``delta``.

    ``marked`` lists boundary-edge ids (see :meth:`boundary_edges`) in
    counterclockwise cyclic order.
    """

    width: int
    height: int
    delta: Fraction = Fraction(1)
    marked: tuple = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("domain needs at least one interior vertex")
        object.__setattr__(self, "delta", to_fraction(self.delta))
        marked = tuple(int(e) for e in self.marked)
        n_edges = 2 * (self.width + self.height)
        if len(set(marked)) != len(marked) or any(not 0 <= e < n_edges for e in marked):
            raise ValueError(f"marked edges must be distinct ids in [0, {n_edges})")
        descents = sum(1 for a, b in zip(marked, marked[1:] + marked[:1]) if b < a)
        if len(marked) > 1 and descents != 1:
            raise ValueError("marked edges are not in counterclockwise order")
        object.__setattr__(self, "marked", marked)

    @property
    def n_vertices(self) -> int:
        return self.width * self.height

    def vertex(self, x: int, y: int) -> int:
        return y * self.width + x

    def coords(self, v: int) -> tuple[int, int]:
        return v % self.width, v // self.width

    @cached_property
    def boundary_edges(self) -> tuple:
        """``(interior vertex, side, outward step)`` per boundary edge, counterclockwise."""
        W, H = self.width, self.height
        edges = [(self.vertex(x, 0), "bottom", (0, -1)) for x in range(W)]
        edges += [(self.vertex(W - 1, y), "right", (1, 0)) for y in range(H)]
        edges += [(self.vertex(x, H - 1), "top", (0, 1)) for x in reversed(range(W))]
        edges += [(self.vertex(0, y), "left", (-1, 0)) for y in reversed(range(H))]
        return tuple(edges)

    def edge_id(self, side: str, offset: int) -> int:
        """Id of the ``offset``-th edge (zero-based, counterclockwise) on ``side``."""
        W, H = self.width, self.height
        lengths = {"bottom": W, "right": H, "top": W, "left": H}
        if not 0 <= offset < lengths[side]:
            raise ValueError(f"offset {offset} outside side {side}")
        start = 0
        for s in _SIDES:
            if s == side:
                return start + offset
            start += lengths[s]
        raise ValueError(side)

    def boundary_point(self, e: int) -> complex:
        """Boundary endpoint of edge ``e`` in lattice units (boundary vertex location)."""
        v, _, (dx, dy) = self.boundary_edges[e]
        x, y = self.coords(v)
        return complex(x + 1 + dx, y + 1 + dy)

    def with_marked(self, marked) -> "GridDomain":
        return GridDomain(self.width, self.height, self.delta, tuple(marked))

    def adjacent_pair(self, e1: int, e2: int) -> bool:
        """Whether two boundary edges are one lattice step apart along a straight side."""
        s1, s2 = self.boundary_edges[e1][1], self.boundary_edges[e2][1]
        return abs(e1 - e2) == 1 and s1 == s2

    def check_grouping(self, valences) -> None:
        q = cumulative(valences)
        if q[-1] != len(self.marked):
            raise ValueError("valences do not match the number of marked edges")
        for j in range(len(valences)):
            grp = self.marked[q[j]:q[j + 1]]
            for a, b in zip(grp, grp[1:]):
                if b != a + 1 or not self.adjacent_pair(a, b):
                    raise ValueError(f"group {j + 1} edges {grp} are not consecutive lattice steps")

    @cached_property
    def laplacian(self) -> sp.csr_matrix:
        """``4 I - A`` on interior vertices (Dirichlet boundary)."""
        W, H = self.width, self.height
        n = W * H
        rows, cols, vals = list(range(n)), list(range(n)), [4.0] * n
        for v in range(n):
            x, y = self.coords(v)
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if 0 <= x + dx < W and 0 <= y + dy < H:
                    rows.append(v)
                    cols.append(self.vertex(x + dx, y + dy))
                    vals.append(-1.0)
        return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))

    def to_dict(self) -> dict:
        return {"width": self.width, "height": self.height, "delta": str(self.delta),
                "marked": list(self.marked)}


def _neighbors(G: GridDomain, v: int):
    x, y = G.coords(v)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        if 0 <= x + dx < G.width and 0 <= y + dy < G.height:
            yield G.vertex(x + dx, y + dy)


def _banded_solve_exact(G: GridDomain, rhs_vertices):
    """Exact columns of ``(4I - A)^{-1}`` by banded Gaussian elimination over Q.

    The matrix is symmetric and strictly diagonally dominant in the row sense
    wherever a boundary edge exists, so elimination without pivoting is safe.
    """
    n, bw = G.n_vertices, G.width
    rows = []
    for v in range(n):
        row = {v: mpq(4)}
        for w in _neighbors(G, v):
            row[w] = mpq(-1)
        rows.append(row)
    k = len(rhs_vertices)
    rhs = [[mpq(0)] * k for _ in range(n)]
    for c, v in enumerate(rhs_vertices):
        rhs[v][c] = mpq(1)
    for p in range(n):
        piv = rows[p][p]
        for i in range(p + 1, min(n, p + bw + 1)):
            f = rows[i].get(p)
            if not f:
                continue
            f = f / piv
            ri = rows[i]
            for col, val in rows[p].items():
                if col > p:
                    ri[col] = ri.get(col, 0) - f * val
            del ri[p]
            rp, rr = rhs[p], rhs[i]
            for c in range(k):
                if rp[c]:
                    rr[c] -= f * rp[c]
    sol = [[mpq(0)] * k for _ in range(n)]
    for p in reversed(range(n)):
        acc = rhs[p][:]
        for col, val in rows[p].items():
            if col > p:
                sc = sol[col]
                for c in range(k):
                    acc[c] -= val * sc[c]
        piv = rows[p][p]
        sol[p] = [a / piv for a in acc]
    return {v: [sol[u][c] for u in range(n)] for c, v in enumerate(rhs_vertices)}


def green_columns(G: GridDomain, sources, exact: bool = True) -> dict:
    """Columns ``G(., w)`` of the Green's function for the given source vertices."""
    sources = list(dict.fromkeys(sources))
    if exact:
        return _banded_solve_exact(G, sources)
    lu = spla.splu(G.laplacian.tocsc())
    rhs = np.zeros((G.n_vertices, len(sources)))
    for c, v in enumerate(sources):
        rhs[v, c] = 1.0
    sol = lu.solve(rhs)
    return {v: sol[:, c] for c, v in enumerate(sources)}


def green_solve(G: GridDomain, exact: bool = True):
    """Full Green's matrix on interior vertices: exact rationals or a float array."""
    cols = green_columns(G, range(G.n_vertices), exact)
    if exact:
        return [[Fraction(int(cols[w][v].numerator), int(cols[w][v].denominator))
                 for w in range(G.n_vertices)] for v in range(G.n_vertices)]
    return np.column_stack([cols[w] for w in range(G.n_vertices)])


def discrete_excursion_kernel(G: GridDomain, e_a: int, e_b: int, exact: bool = True):
    """``K(e_a, e_b) = G(v_a, v_b)`` between the interior endpoints of two boundary edges."""
    va, vb = G.boundary_edges[e_a][0], G.boundary_edges[e_b][0]
    col = green_columns(G, [vb], exact)[vb]
    v = col[va]
    return Fraction(int(v.numerator), int(v.denominator)) if exact else float(v)


def discrete_kernel_matrix(G: GridDomain, valences=None, exact: bool = True) -> KernelMatrix:
    """Kernel on the marked edges; off-diagonal entries ``G(v_a, v_b)``."""
    n = len(G.marked)
    valences = (1,) * n if valences is None else tuple(valences)
    groups = [j for j, s in enumerate(valences) for _ in range(s)]
    verts = [G.boundary_edges[e][0] for e in G.marked]
    cols = green_columns(G, verts, exact)
    zero = mpq(0) if exact else 0.0
    values = [[zero] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            if a != b:
                values[a][b] = cols[verts[b]][verts[a]]
    return KernelMatrix(values, tuple(groups), 0, "discrete",
                        {"domain": G.to_dict(), "valences": list(valences)})


def dtan(values, m: int):
    """``m``-fold forward differences ``f(e_{i+1}) - f(e_i)`` of a sequence."""
    seq = list(values)
    if m >= len(seq) and m > 0:
        raise ValueError(f"{m} differences need more than {len(seq)} values")
    for _ in range(m):
        seq = [b - a for a, b in zip(seq, seq[1:])]
    return seq


def _modified_kernel(G: GridDomain, valences, exact=True) -> KernelMatrix:
    G.check_grouping(valences)
    K = discrete_kernel_matrix(G, valences, exact)
    for j, s in enumerate(valences, start=1):
        if s > 1:
            K = fusion_modify(K, valences, j, "discrete")
    return K


def connection_probability(G: GridDomain, valences, alpha, exact: bool = True, modify: bool = True):
    """``P[Conn(iota(alpha))]`` for the wired UST on ``G`` with the marked edges.

    ``modify=False`` evaluates the unmodified kernel (same value; used to
    test invariance under the modification algorithm).
    """
    valences = tuple(valences)
    if isinstance(alpha, LinkPattern):
        alpha = ValencedLinkPattern.from_links(valences, alpha.links)
    elif not isinstance(alpha, ValencedLinkPattern):
        alpha = ValencedLinkPattern.from_links(valences, [tuple(l) for l in alpha])
    if modify:
        K = _modified_kernel(G, valences, exact)
    else:
        G.check_grouping(valences)
        K = discrete_kernel_matrix(G, (1,) * len(G.marked), exact)
    z = inverse_fomin_sum(unfuse(alpha), K).value
    return z.coefficient if exact else z


def bundled_domains():
    """Small domains shipped for oracle comparisons: ``(GridDomain, valences)`` pairs."""
    data = json.loads(resources.files("ustfusion").joinpath("data/oracle_domains.json").read_text())
    out = []
    for dom in data["domains"]:
        for case in dom["cases"]:
            G = GridDomain(dom["width"], dom["height"], marked=tuple(case["marked"]))
            G.check_grouping(tuple(case["valences"]))
            out.append((G, tuple(case["valences"])))
    return out


class SquareMap:
    """Conformal map of the unit square onto the upper half-plane.

    ``z -> sn(2K (z - 1/2), k)`` with modulus chosen so that ``K'/K = 2``;
    the bottom midpoint goes to 0 and the top midpoint to infinity.
    """

    def __init__(self, dps: int = 30):
        self.dps = dps
        with mpmath.workdps(dps):
            self.m = mpmath.mfrom(q=mpmath.exp(-2 * mpmath.pi))
            self.K = mpmath.ellipk(self.m)

    def __call__(self, z):
        with mpmath.workdps(self.dps):
            u = 2 * self.K * (mpmath.mpc(z) - mpmath.mpf(1) / 2)
            return mpmath.ellipfun("sn", u, m=self.m)

    def derivative(self, z):
        with mpmath.workdps(self.dps):
            u = 2 * self.K * (mpmath.mpc(z) - mpmath.mpf(1) / 2)
            cn = mpmath.ellipfun("cn", u, m=self.m)
            dn = mpmath.ellipfun("dn", u, m=self.m)
            return 2 * self.K * cn * dn


def continuum_square_value(points, valences, alpha, smap: SquareMap | None = None) -> float:
    """``Z_alpha`` of the unit square at boundary points (complex, counterclockwise)."""
    smap = SquareMap() if smap is None else smap
    with mpmath.workdps(smap.dps):
        images = [smap(p) for p in points]
        reals = [mpmath.re(w) for w in images]
        if any(abs(mpmath.im(w)) > mpmath.mpf(10) ** (-smap.dps // 2) for w in images):
            raise ValueError("boundary point did not land on the real line")
        if any(a >= b for a, b in zip(reals, reals[1:])):
            raise ValueError("marked points must be counterclockwise starting after the top midpoint")
        factor = mpmath.mpf(1)
        for p, s in zip(points, valences):
            factor *= abs(smap.derivative(p)) ** (s * (s + 1) // 2)
        # exact evaluation at a rational approximation of the images
        approx = [Fraction(mpmath.nstr(r, smap.dps - 5)) for r in reals]
        cfg = BoundaryConfig(tuple(approx), tuple(valences))
        z = pure_partition(alpha, cfg).value
        return float(factor * z.to_mpf(smap.dps))


def convergence_series(valences, alpha, placements, sizes=(7, 15, 31, 63), exact=False) -> dict:
    """Renormalized discrete probabilities on unit squares versus the continuum value.

    ``placements`` lists ``(side, t)`` per fused point with ``t`` a fraction of
    the side length measured counterclockwise; a point of valence ``s`` marks
    the ``s`` consecutive edges starting there.  ``sizes`` are the numbers of
    interior vertices per side, so ``delta = 1 / (size + 1)``.
    """
    valences = tuple(valences)
    n_links = sum(valences) // 2
    smap = SquareMap()
    points = []
    for side, t in placements:
        t = to_fraction(t)
        points.append({"bottom": complex(t, 0), "right": complex(1, t),
                       "top": complex(1 - t, 1), "left": complex(0, 1 - t)}[side])
    target = continuum_square_value(points, valences, alpha, smap)
    rows = []
    for n in sizes:
        delta = Fraction(1, n + 1)
        G = GridDomain(n, n, delta)
        marked = []
        for (side, t), s in zip(placements, valences):
            off = to_fraction(t) / delta - 1
            if off.denominator != 1:
                raise ValueError(f"placement {t} is not on the lattice for delta={delta}")
            marked.extend(G.edge_id(side, int(off) + k) for k in range(s))
        G = G.with_marked(marked)
        prob = float(connection_probability(G, valences, alpha, exact=exact))
        renorm = float(delta) ** (-2 * n_links) * math.prod(
            float(delta) ** (-(s - 1) * s / 2) for s in valences)
        value = prob * renorm
        rows.append({"delta": str(delta), "probability": prob, "renormalized": value,
                     "relative_gap": abs(value - target) / abs(target)})
    deltas = np.log([float(Fraction(r["delta"])) for r in rows])
    gaps = np.log([r["relative_gap"] for r in rows])
    order = float(np.polyfit(deltas, gaps, 1)[0]) if len(rows) > 1 else float("nan")
    return {"target": target, "rows": rows, "order": order,
            "final_gap": rows[-1]["relative_gap"]}
