"""Fomin-type determinants, inverse Fomin sums and the pure partition functions.

A determinant ``Delta_beta`` takes rows at the left endpoints and columns at
the right endpoints of ``beta``.  The inverse Fomin sum weights the
determinants of all ``beta`` above ``alpha`` in the Dyck-path order by the
number of cover-inclusive Dyck tilings of ``alpha / beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cache

import numpy as np
import sympy
from gmpy2 import mpq

from .combinat import (
    LinkPattern,
    ValencedLinkPattern,
    count_tilings,
    cumulative,
    dp_geq,
    enumerate_link_patterns,
    enumerate_valenced,
    fused_geq,
    unfuse,
)
from .exactnum import ExactScalar, Jet, det_exact, jet_det
from .kernel import BoundaryConfig, KernelMatrix, build_fused_kernel, build_kernel

__all__ = [
    "PartitionValue",
    "link_det",
    "inverse_fomin_sum",
    "pure_partition",
    "explicit_basis_U",
    "zu_transform",
    "exchange_kernel",
    "fusion_modify",
    "rainbow_factor",
    "formal_kernel",
    "diagonal_block_terms",
    "all_link_dets",
    "tiling_weights",
    "fused_weights",
]


@dataclass
class PartitionValue:
    """An evaluated determinant, inverse Fomin sum, or probability."""

    value: object
    kind: str
    pattern: object = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.pattern is not None:
            out["pattern"] = [list(p) for p in (self.pattern.links if isinstance(self.pattern, LinkPattern)
                                                else self.pattern.links())]
        if isinstance(self.value, ExactScalar):
            out["value"] = self.value.to_dict()
            out["decimal"] = self.value.decimal()
        elif isinstance(self.value, Jet):
            out["value"] = self.value.scalar().to_dict()
        else:
            out["value"] = str(self.value)
        out.update(self.config)
        return out


def _raw_det(rows):
    first = rows[0][0]
    if isinstance(first, Jet):
        return jet_det(rows)
    if any(isinstance(v, sympy.Basic) for r in rows for v in r):
        return sympy.Matrix(rows).det(method="berkowitz").expand()
    if isinstance(first, (float, np.floating)):
        return float(np.linalg.det(np.array(rows, dtype=float)))
    if len(rows) <= 4 and all(type(v) is type(first) for r in rows for v in r) and type(first) is type(mpq(0)):
        return _small_det(rows)
    det = det_exact(rows)
    return mpq(det.numerator, det.denominator)


def _small_det(m):
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    acc = mpq(0)
    for c in range(n):
        if m[0][c]:
            minor = [row[:c] + row[c + 1:] for row in m[1:]]
            acc += (-1) ** c * m[0][c] * _small_det(minor)
    return acc


def _check_size(beta: LinkPattern, K: KernelMatrix):
    if beta.size != K.size:
        raise ValueError(f"pattern on {beta.size} indices, kernel of size {K.size}")


def _raw_link_det(beta: LinkPattern, K: KernelMatrix):
    v = K.values
    return _raw_det([[v[a - 1][b - 1] for b in beta.ends] for a in beta.starts])


def _wrap(raw, K: KernelMatrix, n: int):
    pi = K.entry_pi * n
    if isinstance(raw, Jet):
        return Jet(raw.table, raw.order, raw.c, raw.pi_power + pi)
    if K.kind == "formal" or isinstance(raw, float):
        return raw
    return ExactScalar(Fraction(int(raw.numerator), int(raw.denominator)), pi)


def link_det(beta: LinkPattern, K: KernelMatrix) -> PartitionValue:
    """``det(K(a_k, b_l))`` over the left endpoints ``a`` and right endpoints ``b``."""
    _check_size(beta, K)
    return PartitionValue(_wrap(_raw_link_det(beta, K), K, beta.n_links), "Delta", beta)


def all_link_dets(K: KernelMatrix) -> dict:
    """Raw determinants (rational parts) of every pattern of the kernel's size."""
    return {beta: _raw_link_det(beta, K) for beta in enumerate_link_patterns(K.size // 2)}


@cache
def tiling_weights(alpha: LinkPattern) -> tuple:
    """``((beta, #C(alpha/beta)), ...)`` over all ``beta`` above ``alpha`` with nonzero count."""
    out = []
    for beta in enumerate_link_patterns(alpha.n_links):
        if dp_geq(beta, alpha):
            c = count_tilings(alpha, beta)
            if c:
                out.append((beta, c))
    return tuple(out)


@cache
def fused_weights(alpha: LinkPattern, valences: tuple) -> tuple:
    return tuple((beta, 1) for beta in enumerate_link_patterns(alpha.n_links)
                 if fused_geq(beta, alpha, valences))


def _combine(weights, dets):
    acc = None
    for beta, c in weights:
        d = dets[beta]
        term = d * c if c != 1 else d
        acc = term if acc is None else acc + term
    return acc


def inverse_fomin_sum(alpha: LinkPattern, K: KernelMatrix, dets=None) -> PartitionValue:
    """``sum_{beta >= alpha} #C(alpha/beta) Delta_beta``; ``dets`` may hold precomputed determinants."""
    _check_size(alpha, K)
    weights = tiling_weights(alpha)
    if dets is None:
        dets = {beta: _raw_link_det(beta, K) for beta, _ in weights}
    return PartitionValue(_wrap(_combine(weights, dets), K, alpha.n_links), "zfrak", alpha)


def _as_valenced(alpha, cfg: BoundaryConfig) -> ValencedLinkPattern:
    if isinstance(alpha, LinkPattern):
        alpha = ValencedLinkPattern.from_links(cfg.valences, alpha.links)
    elif not isinstance(alpha, ValencedLinkPattern):
        alpha = ValencedLinkPattern.from_links(cfg.valences, [tuple(l) for l in alpha])
    if tuple(alpha.valences) != tuple(cfg.valences):
        raise ValueError(f"pattern valences {alpha.valences} differ from {cfg.valences}")
    return alpha


def pure_partition(alpha, cfg: BoundaryConfig, K: KernelMatrix | None = None,
                   dets=None) -> PartitionValue:
    """Pure partition function ``Z_alpha`` at the configuration ``cfg``."""
    alpha = _as_valenced(alpha, cfg)
    K = build_fused_kernel(cfg) if K is None else K
    z = inverse_fomin_sum(unfuse(alpha), K, dets)
    return PartitionValue(z.value, "Z", alpha, {"config": cfg.to_dict()})


def explicit_basis_U(alpha, cfg: BoundaryConfig, K: KernelMatrix | None = None,
                     dets=None) -> PartitionValue:
    """``U_alpha``: unweighted sum of ``Delta_beta`` over ``beta >=_sigma iota(alpha)``."""
    alpha = _as_valenced(alpha, cfg)
    K = build_fused_kernel(cfg) if K is None else K
    beta0 = unfuse(alpha)
    weights = fused_weights(beta0, tuple(cfg.valences))
    if dets is None:
        dets = {beta: _raw_link_det(beta, K) for beta, _ in weights}
    return PartitionValue(_wrap(_combine(weights, dets), K, beta0.n_links), "U", alpha,
                          {"config": cfg.to_dict()})


def zu_transform(valences) -> tuple[list, list[list[int]]]:
    """Patterns of ``LP_sigma`` and the matrix ``#C(iota(alpha)/iota(beta))`` (zero unless beta above alpha)."""
    pats = enumerate_valenced(valences)
    un = [unfuse(a) for a in pats]
    mat = [[count_tilings(a, b) if dp_geq(b, a) else 0 for b in un] for a in un]
    return list(pats), mat


def exchange_kernel(K: KernelMatrix, k: int, l: int) -> KernelMatrix:
    """Kernel with the roles of indices ``k`` and ``l`` (one-based) swapped."""
    if k == l:
        raise ValueError("exchange needs two distinct indices")
    perm = list(range(K.size))
    perm[k - 1], perm[l - 1] = perm[l - 1], perm[k - 1]
    values = [[K.values[perm[a]][perm[b]] for b in range(K.size)] for a in range(K.size)]
    return KernelMatrix(values, K.groups, K.entry_pi, K.kind, dict(K.meta))


def fusion_modify(K: KernelMatrix, valences, j: int, mode: str = "discrete") -> KernelMatrix:
    """Kernel modification for the fused group ``j`` (one-based).

    ``discrete``: zero the in-group block and replace row/column ``q + m`` by
    the ``(m-1)``-th forward difference of rows ``q+1, ..., q+m``.
    ``continuum-limit``: collapse the group onto its first point and use the
    tangential derivative ``(1/(m-1)!) d^{m-1}`` there.
    """
    q = cumulative(valences)
    lo, s = q[j - 1], valences[j - 1]
    idx = list(range(lo, lo + s))
    inside = set(idx)
    if mode == "discrete":
        out = K.copy()
        v = out.values
        zero = K.zero()
        for a in idx:
            for b in idx:
                v[a][b] = zero
        for m in range(s, 1, -1):
            for b in range(K.size):
                if b in inside:
                    continue
                acc = None
                for k in range(m):
                    term = K.values[lo + k][b] * ((-1) ** (m - 1 - k) * math.comb(m - 1, k))
                    acc = term if acc is None else acc + term
                v[lo + m - 1][b] = acc
        for a in idx:
            for b in range(K.size):
                if b not in inside:
                    v[b][a] = v[a][b]
        return out
    if mode == "continuum-limit":
        if K.kind != "continuum" or "points" not in K.meta:
            raise ValueError("continuum modification needs a continuum kernel with point data")
        points = list(K.meta["points"])
        orders = list(K.meta["orders"])
        scale = list(K.meta.get("scale", [mpq(1)] * K.size))
        groups = list(K.groups)
        for m, a in enumerate(idx, start=1):
            points[a] = points[idx[0]]
            orders[a] = orders[idx[0]] + m - 1
            scale[a] = scale[idx[0]] / math.factorial(m - 1)
            groups[a] = groups[idx[0]]
        out = build_kernel(points, orders, groups, scale=scale)
        out.meta["scale"] = scale
        return out
    raise ValueError(f"unknown mode {mode!r}")


def _remove_indices(K: KernelMatrix, drop) -> KernelMatrix:
    keep = [a for a in range(K.size) if a + 1 not in drop]
    values = [[K.values[a][b] for b in keep] for a in keep]
    return KernelMatrix(values, tuple(K.groups[a] for a in keep), K.entry_pi, K.kind)


def _without_window(alpha: LinkPattern, window):
    lo, hi = window
    inside = set(range(lo, hi + 1))
    kept = [p for p in alpha.links if p[0] not in inside]
    order = sorted(i for p in kept for i in p)
    relabel = {old: new for new, old in enumerate(order, start=1)}
    return LinkPattern(tuple((relabel[a], relabel[b]) for a, b in kept))


def rainbow_factor(alpha: LinkPattern, K: KernelMatrix, window) -> tuple[PartitionValue, PartitionValue]:
    """Split off a rainbow on consecutive indices ``window = (l_1, l_2m)``.

    Returns the rainbow determinant on the window and the inverse Fomin sum of
    the remaining pattern with the window removed from the kernel.
    """
    lo, hi = window
    width = hi - lo + 1
    if width <= 0 or width % 2 or lo < 1 or hi > alpha.size:
        raise ValueError(f"window {window} is not an even run of consecutive indices")
    m = width // 2
    for r in range(m):
        if not alpha.has_link(lo + r, hi - r):
            raise ValueError(f"pattern lacks the rainbow on {window}")
    v = K.values
    rows = [[v[lo + i - 1][hi - k - 1] for k in range(m)] for i in range(m)]
    rain = PartitionValue(_wrap(_raw_det(rows), K, m), "rainbow")
    if m == alpha.n_links:
        one = sympy.Integer(1) if K.kind == "formal" else ExactScalar(1)
        return rain, PartitionValue(one, "zfrak", None)
    rest = _without_window(alpha, window)
    Khat = _remove_indices(K, set(range(lo, hi + 1)))
    return rain, inverse_fomin_sum(rest, Khat)


# --- formal symbols -----------------------------------------------------------

def formal_kernel(n_points: int, groups=None) -> KernelMatrix:
    """Kernel whose off-diagonal entries are independent symbols ``k_a_b = k_b_a``."""
    groups = tuple(range(n_points)) if groups is None else tuple(groups)
    values = [[sympy.Integer(0)] * n_points for _ in range(n_points)]
    for a in range(n_points):
        for b in range(a + 1, n_points):
            if groups[a] != groups[b]:
                values[a][b] = values[b][a] = sympy.Symbol(f"k_{a + 1}_{b + 1}")
    return KernelMatrix(values, groups, 0, "formal")


def _symbol_pair(sym) -> tuple[int, int]:
    _, a, b = sym.name.split("_")
    return int(a), int(b)


def diagonal_block_terms(poly, I, Kset):
    """Terms of a formal polynomial in which every index of ``I`` is paired with ``Kset``."""
    I, Kset = set(I), set(Kset)
    out = sympy.Integer(0)
    for term in sympy.Add.make_args(sympy.expand(poly)):
        paired = set()
        for factor in sympy.Mul.make_args(term):
            base = factor.as_base_exp()[0]
            if isinstance(base, sympy.Symbol):
                a, b = _symbol_pair(base)
                if a in I and b in Kset:
                    paired.add(a)
                elif b in I and a in Kset:
                    paired.add(b)
        if paired == I:
            out += term
    return out
