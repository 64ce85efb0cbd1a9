"""BPZ operators at central charge -2, exact PDE residuals, Möbius covariance,
fusion limits, pairwise asymptotics and indicial-exponent probes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import mpmath
from gmpy2 import mpq

from .combinat import (
    LinkPattern,
    ValencedLinkPattern,
    enumerate_valenced,
    unfuse,
)
from .exactnum import ExactScalar, Jet, jet_of_power, monomial_table, rank_exact, to_fraction
from .fomin import all_link_dets, inverse_fomin_sum, pure_partition
from .kernel import BoundaryConfig, MobiusMap, build_fused_kernel, covariance_factor

__all__ = [
    "BpzOperator",
    "bpz_apply",
    "second_order_bpz",
    "partition_jets",
    "pde_residual",
    "covariance_check",
    "fusion_limit_check",
    "asy_predict",
    "asy_measure",
    "asy_pattern",
    "frobenius_probe",
    "lin_rank",
    "random_chamber_points",
]


def _compositions(n: int):
    if n == 0:
        yield ()
        return
    for first in range(1, n + 1):
        for rest in _compositions(n - first):
            yield (first,) + rest


@dataclass(frozen=True)
class BpzOperator:
    """``D_{s_j + 1}`` at the point ``j`` (zero-based) for valences ``valences``."""

    j: int
    valences: tuple

    @property
    def s(self) -> int:
        return self.valences[self.j]

    @property
    def order(self) -> int:
        return self.s + 1

    @cached_property
    def terms(self) -> tuple:
        """``((m_1, ..., m_k), coefficient)`` for every composition of ``s + 1``."""
        s = self.s
        out = []
        for comp in _compositions(s + 1):
            k = len(comp)
            den = 1
            for l in range(1, k):
                left = sum(comp[:l])
                den *= left * (s + 1 - left)
            out.append((comp, Fraction(-2) ** (s + 1 - k) * math.factorial(s) ** 2 / den))
        return tuple(out)

    def weight(self, i: int) -> int:
        """``h_{1, s_i + 1} = s_i (s_i + 1) / 2``."""
        s = self.valences[i]
        return s * (s + 1) // 2


def _var_map(d: int, j: int | None):
    """Jet variable per point: every point except ``j`` (``None`` = all points)."""
    if j is None:
        return list(range(d))
    return [None if i == j else (i if i < j else i - 1) for i in range(d)]


def bpz_apply(op: BpzOperator, F: Jet, points, variables=None) -> ExactScalar:
    """Exact value of ``D_{s_j+1} F`` at ``points``.

    ``F`` is a jet whose variable for point ``i`` is ``variables[i]``; only
    the points ``i != j`` need a variable.  The operators
    ``L_{-m_1} ... L_{-m_k}`` act right to left.
    """
    d = len(points)
    j = op.j
    variables = _var_map(d, j) if variables is None else list(variables)
    if F.order < op.order:
        raise ValueError(f"jet order {F.order} below operator order {op.order}")
    table = F.table
    pts = [to_fraction(p) for p in points]
    others = [i for i in range(d) if i != j]
    if any(variables[i] is None for i in others):
        raise ValueError("every point other than j needs a jet variable")
    coeff_cache = {}

    def coeffs(m):
        if m not in coeff_cache:
            first, zeroth = [], []
            for i in others:
                v = variables[i]
                a = (Jet.constant(table, 1) if m == 1 else
                     jet_of_power(table, pts[j], pts[i], m - 1, yvar=v))
                b = (None if m == 1 else
                     jet_of_power(table, pts[j], pts[i], m, yvar=v, factor=(1 - m) * op.weight(i)))
                first.append(a)
                zeroth.append(b)
            coeff_cache[m] = (first, zeroth)
        return coeff_cache[m]

    def apply_L(m, G):
        first, zeroth = coeffs(m)
        if not others:
            return G.truncate(G.order - 1).scale(0)
        acc = None
        for idx, i in enumerate(others):
            term = first[idx] * G.diff(variables[i])
            if zeroth[idx] is not None:
                term = term + zeroth[idx] * G
            acc = term if acc is None else acc + term
        return -acc

    memo = {(): F}

    def result(suffix):
        if suffix not in memo:
            memo[suffix] = apply_L(suffix[0], result(suffix[1:]))
        return memo[suffix]

    total = mpq(0)
    for comp, c in op.terms:
        total += mpq(c.numerator, c.denominator) * result(comp).value
    return ExactScalar(Fraction(int(total.numerator), int(total.denominator)), F.pi_power)


def second_order_bpz(F: Jet, j: int, valences, points, variables=None) -> ExactScalar:
    """``[d_j^2 + sum_{i != j} (2/(x_i - x_j) d_i - s_i(s_i+1)/(x_i - x_j)^2)] F`` at ``points``.

    ``F`` needs a jet variable for every point, including ``j``.
    """
    d = len(points)
    variables = list(range(d)) if variables is None else list(variables)
    pts = [to_fraction(p) for p in points]
    vj = variables[j]
    c = F.c
    table = F.table
    total = Fraction(0)
    e = [0] * table.n
    e[vj] = 2
    val = c[table.index[tuple(e)]] * 2
    total += Fraction(int(val.numerator), int(val.denominator))
    f0 = Fraction(int(F.value.numerator), int(F.value.denominator))
    for i in range(d):
        if i == j:
            continue
        e = [0] * table.n
        e[variables[i]] = 1
        di = c[table.index[tuple(e)]]
        diff = pts[i] - pts[j]
        s = valences[i]
        total += 2 / diff * Fraction(int(di.numerator), int(di.denominator))
        total -= Fraction(s * (s + 1)) / diff ** 2 * f0
    return ExactScalar(total, F.pi_power)


def partition_jets(cfg: BoundaryConfig, order: int, j: int | None = None, patterns=None) -> dict:
    """Jets of ``Z_alpha`` for all ``alpha`` in ``LP_sigma`` (or ``patterns``).

    Variables are the points other than ``j`` (all points when ``j`` is None).
    """
    variables = _var_map(cfg.d, j)
    n_vars = sum(v is not None for v in variables)
    table = monomial_table(n_vars, order)
    K = build_fused_kernel(cfg, table, variables)
    dets = all_link_dets(K)
    patterns = enumerate_valenced(cfg.valences) if patterns is None else patterns
    return {a: inverse_fomin_sum(unfuse(a), K, dets).value for a in patterns}


def pde_residual(alpha, valences, points, j: int, jets=None) -> ExactScalar:
    """``D_{s_j+1} Z_alpha`` at ``points`` (``j`` zero-based); exactly zero in theory."""
    cfg = BoundaryConfig(tuple(points), tuple(valences))
    if isinstance(alpha, LinkPattern):
        alpha = ValencedLinkPattern.from_links(cfg.valences, alpha.links)
    op = BpzOperator(j, cfg.valences)
    if jets is None:
        jets = partition_jets(cfg, op.order, j, [alpha])
    return bpz_apply(op, jets[alpha], cfg.points)


def covariance_check(alpha, valences, points, phi: MobiusMap) -> ExactScalar:
    """``Z(x) - prod |phi'(x_j)|^{h_j} Z(phi(x))``; exactly zero in theory."""
    cfg = BoundaryConfig(tuple(points), tuple(valences))
    image = [phi(x) for x in cfg.points]
    if any(a >= b for a, b in zip(image, image[1:])):
        raise ValueError("Möbius map does not preserve the order of the points")
    lhs = pure_partition(alpha, cfg).value
    rhs = pure_partition(alpha, BoundaryConfig(tuple(image), cfg.valences)).value
    return lhs - covariance_factor(cfg.points, cfg.valences, phi) * rhs


def _split_group(alpha: ValencedLinkPattern, j: int):
    """Partially unfuse group ``j`` (zero-based): valences and pattern with that group split."""
    vals = list(alpha.valences)
    s = vals[j]
    new_vals = vals[:j] + [1] * s + vals[j + 1:]
    beta = unfuse(alpha)
    # unfuse fully, then fuse back every group except j
    from .combinat import fuse
    return tuple(new_vals), fuse(beta, tuple(new_vals))


def _fit_slope(xs, ys):
    """Least-squares slope and intercept of ``log y`` against ``log x`` (mpmath)."""
    lx = [mpmath.log(x) for x in xs]
    ly = [mpmath.log(abs(y)) for y in ys]
    n = len(lx)
    mx, my = sum(lx) / n, sum(ly) / n
    sxx = sum((a - mx) ** 2 for a in lx)
    sxy = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    slope = sxy / sxx
    return slope, my - slope * mx


def fusion_limit_check(alpha: ValencedLinkPattern, points, j: int, eps_seq,
                       mode: str = "iterated", offsets=None) -> dict:
    """Renormalized partially unfused ``Z`` approaching ``Z_alpha / prod (m-1)!``.

    ``mode="iterated"`` uses offsets ``eps^{s}, ..., eps`` (hierarchical);
    ``"simultaneous"`` uses ``eps * c`` with ``c = offsets`` (default
    ``0, 1, ..., s-1``) and divides by the Vandermonde of ``c``.
    """
    cfg = BoundaryConfig(tuple(points), tuple(alpha.valences))
    s = cfg.valences[j]
    exact = pure_partition(alpha, cfg).value
    const = math.prod(math.factorial(m - 1) for m in range(1, s + 1))
    target = exact / const
    if s == 1:
        return {"target": exact.to_dict(), "rows": [], "order": None, "exact_match": True}
    new_vals, split = _split_group(alpha, j)
    rows = []
    xj = cfg.points[j]
    c = [Fraction(k) for k in range(s)] if offsets is None else [to_fraction(o) for o in offsets]
    for eps in eps_seq:
        eps = to_fraction(eps)
        if mode == "iterated":
            d = [Fraction(0)] + [eps ** (s + 1 - m) for m in range(2, s + 1)]
            norm = math.prod((d[m - 1] ** (m - 1) for m in range(2, s + 1)), start=Fraction(1))
        elif mode == "simultaneous":
            d = [eps * ck for ck in c]
            vand = math.prod((c[r] - c[q] for q in range(s) for r in range(q + 1, s)), start=Fraction(1))
            norm = eps ** (s * (s - 1) // 2) * vand
        else:
            raise ValueError(f"unknown mode {mode!r}")
        pts = list(cfg.points[:j]) + [xj + dm for dm in d] + list(cfg.points[j + 1:])
        z = pure_partition(split, BoundaryConfig(tuple(pts), new_vals)).value / norm
        rel = abs(((z - target) / target).coefficient)
        rows.append({"eps": str(eps), "relative_error": float(rel)})
    errs = [r["relative_error"] for r in rows]
    order = None
    if len(rows) > 1 and all(e > 0 for e in errs):
        order = float(_fit_slope([Fraction(r["eps"]) for r in rows], errs)[0])
    return {"target": exact.to_dict(), "constant": const, "rows": rows, "order": order,
            "exact_match": False}


def asy_predict(s: int, sp: int, m: int):
    """Exponent of ``|x_{j+1} - x_j|`` and, for ``m`` in ``{0, min}``, the constant."""
    if not 0 <= m <= min(s, sp):
        raise ValueError(f"m={m} outside [0, {min(s, sp)}]")
    exponent = 2 * m * m - m * (2 * s + 2 * sp + 1) + s * sp
    big, small = max(s, sp), min(s, sp)
    if m == 0:
        const = ExactScalar(Fraction(math.prod(math.factorial(k - 1) for k in range(1, small + 1)),
                                     math.prod(math.factorial(big + l - 1) for l in range(1, small + 1))))
    elif m == small:
        const = ExactScalar(Fraction(math.prod(math.factorial(big - small + l) for l in range(1, small + 1))
                                     * math.prod(math.factorial(r - 1) for r in range(1, small + 1))),
                            -small)
    else:
        const = None
    return exponent, const


def asy_pattern(alpha: ValencedLinkPattern, j: int):
    """``hat alpha``: drop the links between points ``j, j+1`` (zero-based) and merge them.

    Returns ``(valences, pattern)``; ``pattern`` is ``None`` for the empty pattern.
    """
    vals = list(alpha.valences)
    m = alpha.count(j + 1, j + 2)
    merged = vals[j] + vals[j + 1] - 2 * m
    links = []
    for (a, b), k in alpha.multilinks:
        if (a, b) == (j + 1, j + 2):
            continue
        def relabel(i):
            return i if i <= j + 1 else i - 1
        links.append(((relabel(a), relabel(b)), k))
    new_vals = vals[:j] + [merged] + vals[j + 2:]
    if merged == 0:
        drop = j + 1
        new_vals = vals[:j] + vals[j + 2:]
        links = [((a if a < drop else a - 1, b if b < drop else b - 1), k) for (a, b), k in links]
    if not new_vals:
        return (), None
    return tuple(new_vals), ValencedLinkPattern(tuple(new_vals), tuple(links))


def asy_measure(alpha: ValencedLinkPattern, points, j: int, eps_seq) -> dict:
    """Fit the exponent and constant of ``Z_alpha`` as ``x_{j+1} -> x_j`` (zero-based ``j``).

    ``points`` gives all points; ``points[j+1]`` is replaced by ``x_j + eps``.
    """
    vals = tuple(alpha.valences)
    xs = [to_fraction(p) for p in points]
    hat_vals, hat = asy_pattern(alpha, j)
    if hat is None:
        z_hat = ExactScalar(1)
    else:
        hat_pts = xs[:j + 1] + xs[j + 2:]
        if hat_vals and len(hat_pts) != len(hat_vals):
            hat_pts = xs[:j] + xs[j + 2:]
        z_hat = pure_partition(hat, BoundaryConfig(tuple(hat_pts), hat_vals)).value
    zs, epss = [], []
    for eps in eps_seq:
        eps = to_fraction(eps)
        pts = xs[:j + 1] + [xs[j] + eps] + xs[j + 2:]
        zs.append(pure_partition(alpha, BoundaryConfig(tuple(pts), vals)).value)
        epss.append(eps)
    with mpmath.workdps(60):
        ys = [z.to_mpf(60) for z in zs]
        slope, _ = _fit_slope(epss, ys)
        exponent = int(round(float(slope)))
        ratio = zs[-1] / z_hat
        eps_last = mpmath.mpf(epss[-1].numerator) / epss[-1].denominator
        const = ratio.to_mpf(60) / eps_last ** exponent
        const_pi = ratio.pi_power
    return {"exponent": float(slope), "constant": const, "constant_pi_power": const_pi,
            "hat_valences": hat_vals, "hat": hat}


def frobenius_probe(Z, points, j: int, eps_seq) -> dict:
    """Leading exponent of ``eps -> Z(..., x_j, x_j + eps, ...)``.

    ``Z`` maps a list of rational points to an :class:`ExactScalar`.
    """
    xs = [to_fraction(p) for p in points]
    vals, epss = [], []
    for eps in eps_seq:
        eps = to_fraction(eps)
        pts = xs[:j + 1] + [xs[j] + eps] + xs[j + 2:]
        vals.append(Z(pts))
        epss.append(eps)
    if all(v.is_zero() for v in vals):
        return {"zero": True, "exponent": None}
    with mpmath.workdps(60):
        slope, _ = _fit_slope(epss, [v.to_mpf(60) for v in vals])
    return {"zero": False, "exponent": float(slope)}


def random_chamber_points(d: int, rng, lo: int = -20, hi: int = 20, den: int = 7):
    """``d`` strictly increasing random rationals."""
    pts = set()
    while len(pts) < d:
        pts.add(Fraction(int(rng.integers(lo * den, hi * den)), den))
    return sorted(pts)


def lin_rank(valences, point_sets) -> tuple[int, int]:
    """Exact rank of the matrix ``Z_alpha(points)`` and ``|LP_sigma|``."""
    pats = enumerate_valenced(valences)
    rows = []
    for a in pats:
        row = []
        for pts in point_sets:
            row.append(pure_partition(a, BoundaryConfig(tuple(pts), tuple(valences))).value.coefficient)
        rows.append(row)
    return rank_exact(rows), len(pats)


ASY_POINTS = (Fraction(0), Fraction(1), Fraction(5, 2))
ASY_EPS = (Fraction(1, 10**8), Fraction(1, 10**9), Fraction(1, 10**10))


def asy_config(s: int, sp: int, m: int):
    """Three-point pattern with ``m`` links between points 1, 2 and the rest to point 3.

    Valences are ``(s, sp, s + sp - 2m)``; the third point is dropped when
    its valence is zero.
    """
    if not 0 <= m <= min(s, sp):
        raise ValueError(f"m={m} outside [0, {min(s, sp)}]")
    third = s + sp - 2 * m
    links = [(1, 2)] * m + [(1, 3)] * (s - m) + [(2, 3)] * (sp - m)
    vals = (s, sp, third) if third else (s, sp)
    return ValencedLinkPattern.from_links(vals, links), ASY_POINTS[:len(vals)]


def asy_check(s: int, sp: int, m: int, eps_seq=ASY_EPS) -> dict:
    """Measured versus predicted exponent and constant for :func:`asy_config`."""
    alpha, pts = asy_config(s, sp, m)
    meas = asy_measure(alpha, pts, 0, eps_seq)
    exponent, const = asy_predict(s, sp, m)
    out = {"s": s, "sp": sp, "m": m, "pattern": str(alpha),
           "predicted_exponent": exponent, "measured_exponent": meas["exponent"],
           "exponent_error": abs(meas["exponent"] - exponent),
           "measured_constant": mpmath.nstr(meas["constant"], 20)}
    if const is not None:
        with mpmath.workdps(60):
            pred = const.to_mpf(60)
            rel = abs(meas["constant"] - pred) / abs(pred)
        out.update(predicted_constant=const.to_dict(), constant_relative_error=float(rel))
    return out
