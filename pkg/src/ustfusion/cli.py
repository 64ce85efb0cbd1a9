"""Command-line front end.

Every subcommand writes a JSON report (``"schema": 1``) or, where a series is
produced, CSV with a header row.  Options may also come from a flat
``key = value`` file given with ``--config``; command-line flags win.

Exit codes: 0 when every exact identity checked in the run holds, 2 for usage
errors, 3 when an identity is violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from importlib import resources

import numpy as np

from .combinat import ValencedLinkPattern, enumerate_valenced, parse_pattern, parse_valences, rsyt_count
from .exactnum import ExactScalar, to_fraction

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 2, 3


class UsageError(Exception):
    pass


# --- parsing helpers -----------------------------------------------------------------

def _fractions(text) -> list[Fraction]:
    if isinstance(text, (list, tuple)):
        return [to_fraction(t) for t in text]
    try:
        return [Fraction(t.strip()) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse rational list {text!r}") from exc


def _ints(text) -> list[int]:
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse integer list {text!r}") from exc


def _valences(text) -> tuple[int, ...]:
    try:
        return tuple(parse_valences(text))
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _pattern(text, valences) -> ValencedLinkPattern:
    try:
        return ValencedLinkPattern.from_links(valences, [tuple(l) for l in parse_pattern(text)])
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid pattern {text!r} for valences {valences}: {exc}") from exc


def _patterns(args, valences) -> list[ValencedLinkPattern]:
    if args.pattern:
        return [_pattern(args.pattern, valences)]
    return list(enumerate_valenced(valences))


def _links(alpha: ValencedLinkPattern) -> list:
    return [list(l) for l in alpha.links()]


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _json_default(o):
    if isinstance(o, ExactScalar):
        return {**o.to_dict(), "decimal": o.decimal()}
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, ValencedLinkPattern):
        return _links(o)
    return str(o)


def render_report(command: str, params: dict, results, ok: bool = True) -> str:
    """Deterministic JSON report."""
    return json.dumps({"schema": SCHEMA, "command": command, "ok": bool(ok), "params": params,
                       "results": results}, default=_json_default, indent=2, sort_keys=True) + "\n"


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_summary(results: list) -> str:
    """One line per result record, for terminals."""
    if not results:
        return "(no results)\n"
    lines = []
    for r in results:
        if isinstance(r, dict):
            lines.append("  ".join(f"{k}={_json_default(v) if not isinstance(v, (int, float, str, bool)) else v}"
                                   for k, v in r.items()))
        else:
            lines.append(str(r))
    return "\n".join(lines) + "\n"


# --- domains -------------------------------------------------------------------------

def _demo_fixture() -> dict:
    return json.loads(resources.files("ustfusion").joinpath("data/demo_3x3.json").read_text())


def _domain(args):
    from .discrete import GridDomain
    if args.domain == "demo":
        fx = _demo_fixture()
        width, height, delta = fx["width"], fx["height"], Fraction(fx["delta"])
    else:
        try:
            width, height = (int(v) for v in args.domain.lower().split("x"))
        except ValueError as exc:
            raise UsageError(f"domain must be 'demo' or WIDTHxHEIGHT, got {args.domain!r}") from exc
        delta = Fraction(args.delta) if args.delta else Fraction(1, max(width, height) + 1)
    if not args.marked:
        raise UsageError("--marked is required")
    try:
        return GridDomain(width, height, delta, tuple(_ints(args.marked)))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fixture_value(G, valences, alpha):
    if G.width != 3 or G.height != 3:
        return None
    for case in _demo_fixture()["cases"]:
        if tuple(case["marked"]) == tuple(G.marked) and tuple(case["valences"]) == tuple(valences) \
                and sorted(map(tuple, case["pattern"])) == sorted(alpha.links()):
            return Fraction(case["probability"])
    return None


# --- subcommands ----------------------------------------------------------------------

def cmd_prob(args):
    from .discrete import connection_probability
    from .ust import exact_enumeration_oracle
    G = _domain(args)
    valences = _valences(args.valences) if args.valences else (1,) * len(G.marked)
    try:
        G.check_grouping(valences)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    results, ok = [], True
    for alpha in _patterns(args, valences):
        p = connection_probability(G, valences, alpha, exact=not args.float)
        rec = {"pattern": _links(alpha)}
        if args.float:
            rec["probability"] = float(p)
        else:
            rec["probability"] = ExactScalar(p)
            ref = _fixture_value(G, valences, alpha)
            if ref is not None:
                rec["fixture"] = str(ref)
                rec["fixture_match"] = ref == p
                ok &= ref == p
            if args.oracle:
                o = exact_enumeration_oracle(G, valences, alpha, max_vertices=args.max_vertices)
                rec["oracle"] = str(o)
                rec["oracle_match"] = o == p
                ok &= o == p
        results.append(rec)
    return {"domain": G.to_dict(), "valences": list(valences)}, results, ok


def _config(args):
    from .kernel import BoundaryConfig
    if args.input:
        with open(args.input) as fh:
            payload = json.load(fh)
        args.valences = ",".join(map(str, payload["valences"]))
        args.points = payload["points"]
        args.pattern = json.dumps(payload.get("pattern")) if payload.get("pattern") else args.pattern
    if not args.valences or args.points is None:
        raise UsageError("--valences and --points (or --input) are required")
    valences = _valences(args.valences)
    try:
        return BoundaryConfig(tuple(_fractions(args.points)), valences)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_partition(args):
    from .fomin import explicit_basis_U, pure_partition
    cfg = _config(args)
    fn = explicit_basis_U if args.basis == "U" else pure_partition
    results = [{"pattern": _links(a), "value": fn(a, cfg).value} for a in _patterns(args, cfg.valences)]
    return {"config": cfg.to_dict(), "basis": args.basis}, results, True


def _point_sets(args, d):
    from .cft import random_chamber_points
    if args.points:
        return [_fractions(args.points)]
    rng = np.random.default_rng(args.seed)
    return [random_chamber_points(d, rng) for _ in range(args.samples)]


def cmd_pde_check(args):
    from .cft import BpzOperator, partition_jets, pde_residual
    from .kernel import BoundaryConfig
    valences = _valences(args.valences)
    pats = _patterns(args, valences)
    js = [args.j] if args.j is not None else list(range(len(valences)))
    results, ok = [], True
    for pts in _point_sets(args, len(valences)):
        cfg = BoundaryConfig(tuple(pts), valences)
        for j in js:
            jets = partition_jets(cfg, BpzOperator(j, valences).order, j, pats)
            for a in pats:
                r = pde_residual(a, valences, pts, j, jets)
                ok &= r.is_zero()
                results.append({"points": [str(p) for p in pts], "j": j, "pattern": _links(a),
                                "residual": r, "zero": r.is_zero()})
    return {"valences": list(valences)}, results, ok


def _mobius(text):
    from .kernel import MobiusMap
    kind, _, rest = str(text).partition(":")
    vals = _fractions(rest)
    try:
        if kind == "translation" and len(vals) == 1:
            return MobiusMap.translation(vals[0])
        if kind == "scaling" and len(vals) == 1:
            return MobiusMap.scaling(vals[0])
        if kind == "mobius" and len(vals) == 4:
            return MobiusMap(*vals)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    raise UsageError("--map must be translation:T, scaling:L or mobius:A,B,C,D")


def cmd_cov_check(args):
    from .cft import covariance_check
    valences = _valences(args.valences)
    maps = args.map or ["translation:3/7", "scaling:5/2", "mobius:1,0,-1/50,1"]
    results, ok = [], True
    for pts in _point_sets(args, len(valences)):
        for text in maps:
            phi = _mobius(text)
            for a in _patterns(args, valences):
                try:
                    r = covariance_check(a, valences, pts, phi)
                except (ValueError, ZeroDivisionError) as exc:
                    raise UsageError(f"map {text} not admissible at {pts}: {exc}") from exc
                ok &= r.is_zero()
                results.append({"points": [str(p) for p in pts], "map": text, "pattern": _links(a),
                                "residual": r, "zero": r.is_zero()})
    return {"valences": list(valences)}, results, ok


def cmd_fuse_check(args):
    from .cft import fusion_limit_check
    valences = _valences(args.valences)
    pts = _fractions(args.points) if args.points else [Fraction(3 * k) for k in range(len(valences))]
    eps = _fractions(args.eps) if args.eps else [Fraction(1, 10 ** k) for k in (2, 3, 4)]
    results = []
    js = [args.j] if args.j is not None else [j for j, s in enumerate(valences) if s > 1]
    for a in _patterns(args, valences):
        for j in js:
            rep = fusion_limit_check(a, pts, j, eps, mode=args.mode)
            results.append({"pattern": _links(a), "j": j, **rep})
    return {"valences": list(valences), "points": [str(p) for p in pts], "mode": args.mode}, results, True


def cmd_asy(args):
    from .cft import asy_check
    triples = []
    if args.s is not None:
        ms = [args.m] if args.m is not None else range(min(args.s, args.sp) + 1)
        triples = [(args.s, args.sp, m) for m in ms]
    else:
        for s in range(1, args.max_total):
            for sp in range(1, args.max_total + 1 - s):
                triples += [(s, sp, m) for m in range(min(s, sp) + 1)]
    results, ok = [], True
    for s, sp, m in triples:
        try:
            rec = asy_check(s, sp, m)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        good = rec["exponent_error"] < 0.01 and rec.get("constant_relative_error", 0.0) < 1e-6
        rec["holds"] = good
        ok &= good
        results.append(rec)
    return {"exponent_tolerance": 0.01, "constant_tolerance": 1e-6}, results, ok


def cmd_tl_check(args):
    from .tl import tl_relation_suite
    vals_list = [_valences(v) for v in args.valences.split(";")] if args.valences else []
    for v in vals_list:
        if sum(v) != 2 * args.n_links:
            raise UsageError(f"valences {v} do not sum to {2 * args.n_links}")
    res = tl_relation_suite(args.n_links, vals_list, n_points=args.n_points, seed=args.seed,
                            convention=args.convention)
    ok = all(r["holds"] for r in res if not r.get("informational"))
    return {"n_links": args.n_links, "convention": args.convention, "n_points": args.n_points,
            "seed": args.seed}, res, ok


def cmd_lin(args):
    from .cft import lin_rank
    valences = _valences(args.valences)
    rng = np.random.default_rng(args.seed)
    from .cft import random_chamber_points
    m = len(enumerate_valenced(valences))
    rank, size = lin_rank(valences, [random_chamber_points(len(valences), rng) for _ in range(m)])
    ok = rank == size == rsyt_count(valences)
    return {"valences": list(valences)}, [{"rank": rank, "patterns": size,
                                           "tableaux": rsyt_count(valences)}], ok


def cmd_sample(args):
    from .discrete import connection_probability
    from .ust import mc_estimate
    G = _domain(args)
    valences = _valences(args.valences) if args.valences else (1,) * len(G.marked)
    results = []
    for alpha in _patterns(args, valences):
        est = mc_estimate(G, valences, alpha, args.n, args.seed, workers=args.workers)
        rec = {"pattern": _links(alpha), **est}
        if not args.no_exact:
            p = connection_probability(G, valences, alpha, exact=G.n_vertices <= 400)
            p = float(p)
            rec["exact"] = p
            se = max(est["stderr"], (p * (1 - p) / args.n) ** 0.5)
            rec["z"] = (est["estimate"] - p) / se if se > 0 else 0.0
        results.append(rec)
    return {"domain": G.to_dict(), "valences": list(valences), "n": args.n, "seed": args.seed}, results, True


def _placements(text):
    out = []
    for item in str(text).split(","):
        side, _, t = item.strip().partition(":")
        if side not in ("bottom", "right", "top", "left") or not t:
            raise UsageError(f"placement {item!r} must look like side:t")
        out.append((side, Fraction(t)))
    return out


def cmd_converge(args):
    from .discrete import convergence_series
    valences = _valences(args.valences)
    if not args.pattern or not args.placements:
        raise UsageError("--pattern and --placements are required")
    alpha = _pattern(args.pattern, valences)
    try:
        rep = convergence_series(valences, alpha, _placements(args.placements), tuple(_ints(args.sizes)))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "csv":
        return None, render_csv(["delta", "probability", "renormalized", "relative_gap"],
                                [[r["delta"], repr(r["probability"]), repr(r["renormalized"]),
                                  repr(r["relative_gap"])] for r in rep["rows"]]), True
    return {"valences": list(valences), "pattern": _links(alpha), "placements": args.placements}, rep, True


def cmd_sle(args):
    from .sle import simulate_driving
    pts = [float(p) for p in _fractions(args.points)]
    valences = _valences(args.valences) if args.valences else None
    alpha = _pattern(args.pattern, valences) if (args.pattern and valences) else None
    try:
        rec = simulate_driving(args.variant, pts, dt=args.dt, horizon=args.horizon, seed=args.seed,
                               alpha=alpha, valences=valences, j=args.j or 0, noise=not args.no_noise,
                               tracked=[float(p) for p in _fractions(args.tracked)] if args.tracked else ())
    except (ValueError, IndexError) as exc:
        raise UsageError(str(exc)) from exc
    if args.format == "csv":
        return None, rec.to_csv(), True
    return {"variant": args.variant, "points": pts}, rec.to_dict(), True


# --- parser ------------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="flat key = value file; flags win")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--summary", action="store_true", help="print a one-line-per-record summary to stderr")


def _add_domain(p):
    p.add_argument("--domain", default="demo", help="'demo' (bundled 3x3) or WIDTHxHEIGHT")
    p.add_argument("--delta", help="mesh size (default 1/(max side + 1))")
    p.add_argument("--marked", help="counterclockwise boundary edge ids, comma separated")
    p.add_argument("--valences", help="valences, e.g. 2,1,1 (default all ones)")
    p.add_argument("--pattern", help='pattern as JSON links, e.g. "[[1,2],[3,4]]" (default all)')


def _add_points(p, required_valences=True):
    p.add_argument("--valences", required=False, help="valences, e.g. 1,2,1")
    p.add_argument("--pattern", help="pattern as JSON links (default all patterns)")
    p.add_argument("--points", help="increasing rationals, e.g. 0,1,5/2")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ustfusion", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prob", help="exact connection probability on a grid domain")
    _add_common(p)
    _add_domain(p)
    p.add_argument("--float", action="store_true", help="floating-point Green's function solve")
    p.add_argument("--oracle", action="store_true", help="also run the enumeration oracle")
    p.add_argument("--max-vertices", type=int, default=20)
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("partition", help="pure partition function or U basis value")
    _add_common(p)
    _add_points(p)
    p.add_argument("--input", help='JSON file {"valences": [...], "pattern": [...], "points": [...]}')
    p.add_argument("--basis", choices=("Z", "U"), default="Z")
    p.set_defaults(func=cmd_partition)

    for name, func, helptext in (("pde-check", cmd_pde_check, "exact BPZ residuals"),
                                 ("cov-check", cmd_cov_check, "exact Möbius covariance residuals")):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)
        _add_points(p)
        p.add_argument("--j", type=int, help="zero-based point index (default all)")
        p.add_argument("--samples", type=int, default=5, help="random chamber points when --points is absent")
        p.add_argument("--seed", type=int, default=0)
        if name == "cov-check":
            p.add_argument("--map", action="append", help="translation:T, scaling:L or mobius:A,B,C,D")
        p.set_defaults(func=func)

    p = sub.add_parser("fuse-check", help="fusion limit of partially unfused partition functions")
    _add_common(p)
    _add_points(p)
    p.add_argument("--j", type=int, help="zero-based fused point (default all with valence > 1)")
    p.add_argument("--eps", help="offsets, e.g. 1/100,1/1000")
    p.add_argument("--mode", choices=("iterated", "simultaneous"), default="iterated")
    p.set_defaults(func=cmd_fuse_check)

    p = sub.add_parser("asy", help="asymptotics as two neighbouring points merge")
    _add_common(p)
    p.add_argument("--s", type=int)
    p.add_argument("--sp", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--max-total", type=int, default=5, help="all (s, s') with s + s' <= this")
    p.set_defaults(func=cmd_asy)

    p = sub.add_parser("tl-check", help="Temperley-Lieb relations and the fusion map")
    _add_common(p)
    p.add_argument("--n-links", type=int, default=3)
    p.add_argument("--valences", help="semicolon-separated valence lists, e.g. '2,2,2;3,3'")
    p.add_argument("--n-points", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--convention", choices=("-1-tau", "tau-1"), default="-1-tau")
    p.set_defaults(func=cmd_tl_check)

    p = sub.add_parser("lin", help="exact rank of the partition-function evaluation matrix")
    _add_common(p)
    p.add_argument("--valences", required=False)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_lin)

    p = sub.add_parser("sample", help="Wilson-sampler estimate of connection probabilities")
    _add_common(p)
    _add_domain(p)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None, help="threads (default USTFUSION_THREADS or 1)")
    p.add_argument("--no-exact", action="store_true")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("converge", help="renormalized discrete probabilities versus the continuum")
    _add_common(p)
    p.add_argument("--valences", required=False)
    p.add_argument("--pattern")
    p.add_argument("--placements", help="side:t per fused point, e.g. left:1/2,right:1/2")
    p.add_argument("--sizes", default="7,15,31,63")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("sle", help="simulate a driving function")
    _add_common(p)
    p.add_argument("--variant", choices=("local-fused", "watermelon", "simultaneous"), default="watermelon")
    p.add_argument("--points", required=False, help="initial points")
    p.add_argument("--valences")
    p.add_argument("--pattern")
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-5)
    p.add_argument("--horizon", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--tracked", help="passive test points for simultaneous growth")
    p.add_argument("--format", choices=("json", "csv"), default="csv")
    p.set_defaults(func=cmd_sle)
    return parser


def _apply_config(parser, argv):
    """Re-parse with config-file values as defaults so that flags win."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    cfg = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in cfg.items():
        if key not in known or key in ("config", "func", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(action, argparse._AppendAction):
            defaults[key] = [v.strip() for v in value.split(";")]
        elif action.type is not None:
            defaults[key] = action.type(value)
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        params, results, ok = args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = results if params is None else render_report(args.command, params, results, ok)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.summary and params is not None:
        sys.stderr.write(render_summary(results if isinstance(results, list) else [results]))
    return EXIT_OK if ok else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
