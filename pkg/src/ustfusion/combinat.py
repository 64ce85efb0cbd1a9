"""Link patterns, Dyck paths, valenced patterns and cover-inclusive Dyck tilings.

A link pattern on ``2N`` points is stored as a sorted tuple of pairs ``(a, b)``
with ``a < b`` (one-based), so ``((1, 4), (2, 3))`` is the two-link rainbow.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cache, cached_property
from math import comb, factorial, prod

from .exactnum import ExactScalar

__all__ = [
    "LinkPattern",
    "ValencedLinkPattern",
    "catalan",
    "enumerate_link_patterns",
    "enumerate_valenced",
    "unfuse",
    "fuse",
    "compare",
    "dp_geq",
    "fused_geq",
    "count_tilings",
    "dyck_tilings",
    "rsyt_count",
    "row_strict_tableaux",
    "factorial_det",
    "factorial_matrix",
    "cumulative",
    "parse_pattern",
    "parse_valences",
]


def catalan(n: int) -> int:
    return comb(2 * n, n) // (n + 1)


def cumulative(valences) -> tuple[int, ...]:
    """Cumulative sums ``(q_0, q_1, ..., q_d)`` with ``q_0 = 0``."""
    return tuple(itertools.accumulate(valences, initial=0))


@dataclass(frozen=True, order=True)
class LinkPattern:
    """Planar pairing of ``{1, ..., 2N}`` in left-to-right orientation."""

    links: tuple[tuple[int, int], ...]

    def __post_init__(self):
        links = tuple(sorted(tuple(sorted(map(int, p))) for p in self.links))
        object.__setattr__(self, "links", links)
        n = len(links)
        if sorted(i for p in links for i in p) != list(range(1, 2 * n + 1)):
            raise ValueError(f"not a perfect matching of 1..{2 * n}: {links}")
        for (a, b), (c, d) in itertools.combinations(links, 2):
            if a < c < b < d or c < a < d < b:
                raise ValueError(f"links {a, b} and {c, d} cross")

    @classmethod
    def from_dyck(cls, path) -> "LinkPattern":
        stack, links = [], []
        for i in range(1, len(path)):
            if path[i] > path[i - 1]:
                stack.append(i)
            else:
                links.append((stack.pop(), i))
        return cls(tuple(links))

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def size(self) -> int:
        return 2 * len(self.links)

    @property
    def starts(self) -> tuple[int, ...]:
        return tuple(a for a, _ in self.links)

    @property
    def ends(self) -> tuple[int, ...]:
        return tuple(b for _, b in self.links)

    @cached_property
    def partner(self) -> dict[int, int]:
        out = {}
        for a, b in self.links:
            out[a], out[b] = b, a
        return out

    @cached_property
    def dyck_path(self) -> tuple[int, ...]:
        """Heights ``alpha(0), ..., alpha(2N)``: up-steps at link starts."""
        starts = set(self.starts)
        heights = [0]
        for i in range(1, self.size + 1):
            heights.append(heights[-1] + (1 if i in starts else -1))
        return tuple(heights)

    def has_link(self, i: int, j: int) -> bool:
        return self.partner.get(i) == j

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.links])

    def __str__(self):
        return self.to_json()


@dataclass(frozen=True)
class ValencedLinkPattern:
    """Multilinks between ``d`` fused points with prescribed valences.

    ``multilinks`` maps a pair ``(i, j)``, ``i < j``, to the number of links
    between points ``i`` and ``j`` (one-based).
    """

    valences: tuple[int, ...]
    multilinks: tuple[tuple[tuple[int, int], int], ...]

    def __post_init__(self):
        vals = tuple(int(s) for s in self.valences)
        if not vals or min(vals) < 1:
            raise ValueError(f"valences must be positive: {vals}")
        if sum(vals) % 2:
            raise ValueError(f"valences must sum to an even number: {vals}")
        n = sum(vals) // 2
        if max(vals) > n:
            raise ValueError(f"max valence {max(vals)} exceeds N={n}")
        raw = self.multilinks.items() if isinstance(self.multilinks, dict) else self.multilinks
        counts: dict[tuple[int, int], int] = {}
        for (i, j), k in raw:
            i, j = sorted((int(i), int(j)))
            if i == j:
                raise ValueError(f"link inside fused point {i}")
            if k:
                counts[(i, j)] = counts.get((i, j), 0) + int(k)
        degree = [0] * len(vals)
        for (i, j), k in counts.items():
            degree[i - 1] += k
            degree[j - 1] += k
        if tuple(degree) != vals:
            raise ValueError(f"degrees {tuple(degree)} do not match valences {vals}")
        object.__setattr__(self, "valences", vals)
        object.__setattr__(self, "multilinks", tuple(sorted(counts.items())))
        unfuse(self)  # raises if not planar

    @classmethod
    def from_links(cls, valences, links) -> "ValencedLinkPattern":
        counts: dict[tuple[int, int], int] = {}
        for i, j in links:
            key = tuple(sorted((i, j)))
            counts[key] = counts.get(key, 0) + 1
        return cls(tuple(valences), tuple(counts.items()))

    @property
    def n_links(self) -> int:
        return sum(self.valences) // 2

    @property
    def d(self) -> int:
        return len(self.valences)

    def count(self, i: int, j: int) -> int:
        return dict(self.multilinks).get(tuple(sorted((i, j))), 0)

    def links(self) -> list[tuple[int, int]]:
        return [p for p, k in self.multilinks for _ in range(k)]

    def to_json(self) -> str:
        return json.dumps([list(p) for p in self.links()])

    def __str__(self):
        return f"{self.to_json()} @ {list(self.valences)}"


def parse_pattern(text) -> list[tuple[int, int]]:
    data = json.loads(text) if isinstance(text, str) else text
    return [tuple(int(v) for v in p) for p in data]


def parse_valences(text) -> tuple[int, ...]:
    if isinstance(text, str):
        text = text.strip().strip("[]()")
        return tuple(int(t) for t in text.replace(" ", "").split(",") if t)
    return tuple(int(t) for t in text)


@cache
def enumerate_link_patterns(n: int) -> tuple[LinkPattern, ...]:
    """All planar ``n``-link patterns, ordered lexicographically by left endpoints."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out = []
    for starts in itertools.combinations(range(1, 2 * n + 1), n):
        s = set(starts)
        h, ok = 0, True
        for i in range(1, 2 * n + 1):
            h += 1 if i in s else -1
            if h < 0:
                ok = False
                break
        if ok:
            path = [0]
            for i in range(1, 2 * n + 1):
                path.append(path[-1] + (1 if i in s else -1))
            out.append(LinkPattern.from_dyck(path))
    return tuple(out)


def _groups(valences) -> list[int]:
    """Group label (one-based) of each unfused index 1..2N, as a 0-padded list."""
    g = [0]
    for j, s in enumerate(valences, start=1):
        g.extend([j] * s)
    return g


def unfuse(alpha: ValencedLinkPattern) -> LinkPattern:
    """The planar pattern obtained by opening every fused point into ``s_j`` points.

    Within a fused point, links to the left come first, and among links going
    the same way the one reaching farther out takes the outer position.
    """
    vals = alpha.valences
    q = cumulative(vals)
    half_edges = []  # (group, partner) in left-to-right order
    for g in range(1, len(vals) + 1):
        partners = []
        for (i, j), k in alpha.multilinks:
            if g in (i, j):
                partners.extend([j if i == g else i] * k)
        left = sorted((p for p in partners if p < g), reverse=True)
        right = sorted((p for p in partners if p > g), reverse=True)
        half_edges.extend((g, p) for p in left + right)
    assert len(half_edges) == q[-1]
    stack, links = [], []
    for idx, (g, p) in enumerate(half_edges, start=1):
        if p > g:
            stack.append((idx, g, p))
        else:
            if not stack:
                raise ValueError(f"valenced pattern is not planar: {alpha.multilinks}")
            j, g0, p0 = stack.pop()
            if (g0, p0) != (p, g):
                raise ValueError(f"valenced pattern is not planar: {alpha.multilinks}")
            links.append((j, idx))
    return LinkPattern(tuple(links))


def fuse(beta: LinkPattern, valences) -> ValencedLinkPattern:
    """Inverse of :func:`unfuse` on patterns without links inside a group."""
    g = _groups(valences)
    if len(g) - 1 != beta.size:
        raise ValueError("valences do not match pattern size")
    return ValencedLinkPattern.from_links(valences, [(g[a], g[b]) for a, b in beta.links])


def _no_inner_links(beta: LinkPattern, valences) -> bool:
    g = _groups(valences)
    return all(g[a] != g[b] for a, b in beta.links)


@cache
def _enumerate_valenced(valences: tuple[int, ...]) -> tuple[ValencedLinkPattern, ...]:
    n2 = sum(valences)
    if n2 % 2 or min(valences) < 1:
        raise ValueError(f"invalid valences {valences}")
    if max(valences) > n2 // 2:
        raise ValueError(f"max valence exceeds N for {valences}")
    return tuple(fuse(b, valences) for b in enumerate_link_patterns(n2 // 2)
                 if _no_inner_links(b, valences))


def enumerate_valenced(valences) -> tuple[ValencedLinkPattern, ...]:
    """All valenced patterns with no link inside a fused point."""
    return _enumerate_valenced(tuple(int(s) for s in valences))


def dp_geq(beta: LinkPattern, alpha: LinkPattern) -> bool:
    """Dyck-path order: ``beta`` lies weakly above ``alpha`` everywhere."""
    if beta.size != alpha.size:
        raise ValueError("patterns of different sizes")
    return all(b >= a for a, b in zip(alpha.dyck_path, beta.dyck_path))


def fused_geq(beta: LinkPattern, alpha: LinkPattern, valences) -> bool:
    """The order ``>=_s``: DP dominance plus equal heights at every ``q_j``."""
    q = cumulative(valences)
    if q[-1] != alpha.size:
        raise ValueError("valences do not match pattern size")
    return dp_geq(beta, alpha) and all(beta.dyck_path[t] == alpha.dyck_path[t] for t in q)


def compare(beta: LinkPattern, alpha: LinkPattern, order="DP", valences=None) -> bool:
    if order == "DP":
        return dp_geq(beta, alpha)
    if order == "fused":
        if valences is None:
            raise ValueError("fused order needs valences")
        return fused_geq(beta, alpha, valences)
    raise ValueError(f"unknown order {order!r}")


# --- Dyck tilings -----------------------------------------------------------

def _skew_boxes(lower, upper) -> frozenset[tuple[int, int]]:
    """Unit diamonds between two Dyck paths, keyed by centre ``(i, y)``."""
    boxes = set()
    for i in range(1, len(lower) - 1):
        for y in range(lower[i] + 1, upper[i], 2):
            boxes.add((i, y))
    return frozenset(boxes)


def _tiles_from(start, free):
    """Dyck tiles whose leftmost box is ``start`` and all boxes lie in ``free``."""
    i0, y0 = start
    out = []

    def grow(path):
        i, y = path[-1]
        if len(path) > 1 and y == y0:
            out.append(tuple(path))
        for dy in (1, -1):
            nxt = (i + 1, y + dy)
            if nxt[1] >= y0 and nxt in free:
                path.append(nxt)
                grow(path)
                path.pop()

    out.append((start,))
    i, y = start
    for dy in (1, -1):
        nxt = (i + 1, y + dy)
        if nxt[1] >= y0 and nxt in free:
            grow([start, nxt])
    return out


def dyck_tilings(lower, upper):
    """Yield every Dyck tiling of the skew shape between two Dyck paths."""
    boxes = _skew_boxes(lower, upper)
    order = sorted(boxes)

    def rec(free, tiles):
        if not free:
            yield list(tiles)
            return
        start = min(free)
        for tile in _tiles_from(start, free):
            tiles.append(tile)
            yield from rec(free.difference(tile), tiles)
            tiles.pop()

    if not order:
        yield []
        return
    yield from rec(frozenset(boxes), [])


def is_cover_inclusive(tiling) -> bool:
    """Whenever a box of one tile sits directly above a box of another tile
    (same column, two units higher), the upper tile's horizontal extent must be
    contained in the lower tile's extent."""
    owner, extent = {}, []
    for k, tile in enumerate(tiling):
        extent.append((tile[0][0], tile[-1][0]))
        for box in tile:
            owner[box] = k
    for (i, y), k in owner.items():
        below = owner.get((i, y - 2))
        if below is not None and below != k:
            lo, hi = extent[below]
            a, b = extent[k]
            if not (lo <= a and b <= hi):
                return False
    return True


@cache
def _count_tilings(lower: tuple[int, ...], upper: tuple[int, ...]) -> int:
    return sum(1 for t in dyck_tilings(lower, upper) if is_cover_inclusive(t))


def count_tilings(alpha: LinkPattern, beta: LinkPattern) -> int:
    """Number of cover-inclusive Dyck tilings of the skew shape ``alpha / beta``.

    Zero unless ``beta`` dominates ``alpha`` in the Dyck-path order.
    """
    if not dp_geq(beta, alpha):
        return 0
    return _count_tilings(alpha.dyck_path, beta.dyck_path)


# --- tableaux ----------------------------------------------------------------

def row_strict_tableaux(valences):
    """Fillings of the N-by-2 rectangle with content ``valences`` that increase
    strictly along rows and weakly down columns."""
    vals = tuple(valences)
    n2 = sum(vals)
    if n2 % 2:
        return []
    n = n2 // 2
    content = [j for j, s in enumerate(vals, start=1) for _ in range(s)]
    out = []
    for left in set(itertools.combinations(content, n)):
        rest = list(content)
        for v in left:
            rest.remove(v)
        right = tuple(sorted(rest))
        if all(a < b for a, b in zip(left, right)):
            out.append((left, right))
    return sorted(out)


def rsyt_count(valences) -> int:
    return len(row_strict_tableaux(valences))


# --- factorial determinants ---------------------------------------------------

def factorial_matrix(variant: str, a: int, b: int) -> list[list[Fraction]]:
    """Matrix A(s, s') with entries ``1/(s - l + k)!`` or B(m, t) with ``(r+s+t-1)!``."""
    if variant == "A":
        s, sp = a, b
        return [[Fraction(1, factorial(s - l + k)) if s - l + k >= 0 else Fraction(0)
                 for k in range(1, sp + 1)] for l in range(1, sp + 1)]
    if variant == "B":
        m, t = a, b
        return [[Fraction(factorial(r + s + t - 1)) for s in range(1, m + 1)]
                for r in range(1, m + 1)]
    raise ValueError(f"unknown variant {variant!r}")


def factorial_det(variant: str, a: int, b: int) -> ExactScalar:
    """Closed-form value of the factorial determinants A(s_j, s_{j+1}) and B(m, t)."""
    if variant == "A":
        s, sp = a, b
        if not 1 <= sp <= s:
            raise ValueError("variant A needs 1 <= s_{j+1} <= s_j")
        return ExactScalar(Fraction(prod(factorial(sp - k) for k in range(1, sp + 1)),
                                    prod(factorial(s + sp - l) for l in range(1, sp + 1))))
    if variant == "B":
        m, t = a, b
        if m < 1 or t < -1:
            raise ValueError("variant B needs m >= 1 and t >= -1")
        return ExactScalar(Fraction(prod(factorial(s + t) for s in range(1, m + 1))
                                    * prod(factorial(r - 1) for r in range(1, m + 1))))
    raise ValueError(f"unknown variant {variant!r}")
