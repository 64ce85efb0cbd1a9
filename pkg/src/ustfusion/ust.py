"""Wired uniform spanning trees: Wilson sampler, branch tracing, Monte Carlo and
an independent exact oracle.

Trees are stored as parent pointers on interior vertices.  A parent value
``p >= 0`` is an interior vertex; ``p < 0`` encodes the boundary edge
``-1 - p`` through which the vertex attaches to the wired boundary.

Randomness comes from SplitMix64 streams keyed by ``(seed, sample index)``,
so every sample is reproducible on its own and results do not depend on how
samples are split between workers.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numba
import numpy as np

from .combinat import LinkPattern, ValencedLinkPattern, enumerate_link_patterns, unfuse
from .discrete import GridDomain

__all__ = [
    "SpanningForest",
    "ConnectivityOutcome",
    "wilson_sample",
    "wilson_batch",
    "detect_connectivity",
    "mc_estimate",
    "mc_frequencies",
    "matrix_tree_count",
    "exact_enumeration_oracle",
    "brute_force_oracle",
    "enumerate_trees",
]

_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def _tables(G: GridDomain):
    """Neighbor table ``nbr[v, k]`` (-1 when the step leaves the domain) and
    the boundary edge id ``bedge[v, k]`` of such steps."""
    n = G.n_vertices
    nbr = np.full((n, 4), -1, dtype=np.int64)
    bedge = np.full((n, 4), -1, dtype=np.int64)
    lookup = {(v, step): e for e, (v, _, step) in enumerate(G.boundary_edges)}
    for v in range(n):
        x, y = G.coords(v)
        for k, (dx, dy) in enumerate(_DIRS):
            if 0 <= x + dx < G.width and 0 <= y + dy < G.height:
                nbr[v, k] = G.vertex(x + dx, y + dy)
            else:
                bedge[v, k] = lookup[(v, (dx, dy))]
    return nbr, bedge


@numba.njit(cache=True)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    return state, z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _stream_start(seed, index):
    s, _ = _splitmix(np.uint64(seed))
    s, a = _splitmix(s ^ np.uint64(index) * np.uint64(0xD1B54A32D192ED03))
    return a


@numba.njit(cache=True)
def _wilson(nbr, bedge, state, parent, in_tree):
    n = nbr.shape[0]
    for v in range(n):
        in_tree[v] = False
    for start in range(n):
        u = start
        while not in_tree[u]:
            state, r = _splitmix(state)
            k = np.int64(r >> np.uint64(62))
            w = nbr[u, k]
            if w < 0:
                parent[u] = -1 - bedge[u, k]
                break
            parent[u] = w
            u = w
        u = start
        while not in_tree[u]:
            in_tree[u] = True
            p = parent[u]
            if p < 0:
                break
            u = p
    return state


@numba.njit(cache=True)
def _trace_exits(parent, sources, n_steps_max):
    out = np.empty(sources.shape[0], dtype=np.int64)
    for i in range(sources.shape[0]):
        u = sources[i]
        steps = 0
        while parent[u] >= 0 and steps < n_steps_max:
            u = parent[u]
            steps += 1
        out[i] = -1 - parent[u]
    return out


@numba.njit(cache=True, nogil=True)
def _batch(nbr, bedge, seed, first, count, sources):
    n = nbr.shape[0]
    parent = np.empty(n, dtype=np.int64)
    in_tree = np.empty(n, dtype=np.bool_)
    exits = np.empty((count, sources.shape[0]), dtype=np.int64)
    for i in range(count):
        state = _stream_start(seed, first + i)
        _wilson(nbr, bedge, state, parent, in_tree)
        exits[i, :] = _trace_exits(parent, sources, n + 1)
    return exits


@dataclass(frozen=True)
class SpanningForest:
    """Wired spanning tree as parent pointers (see module docstring)."""

    parent: tuple

    def used_edges(self, G: GridDomain) -> frozenset:
        """Interior edges as vertex pairs plus boundary edges as ``("b", id)``."""
        edges = set()
        for v, p in enumerate(self.parent):
            edges.add(("b", -1 - p) if p < 0 else (min(v, p), max(v, p)))
        return frozenset(edges)

    def branch(self, v: int) -> list[int]:
        path = [v]
        while self.parent[path[-1]] >= 0:
            path.append(self.parent[path[-1]])
            if len(path) > len(self.parent) + 1:
                raise ValueError("parent pointers contain a cycle")
        return path

    def exit_edge(self, v: int) -> int:
        return -1 - self.parent[self.branch(v)[-1]]

    def is_valid(self) -> bool:
        try:
            for v in range(len(self.parent)):
                self.branch(v)
        except ValueError:
            return False
        return True


@dataclass(frozen=True)
class ConnectivityOutcome:
    conn: bool
    pairing: LinkPattern | None = None


def wilson_sample(G: GridDomain, seed: int, index: int = 0) -> SpanningForest:
    """Uniform wired spanning tree; deterministic in ``(seed, index)``."""
    nbr, bedge = _tables(G)
    parent = np.empty(G.n_vertices, dtype=np.int64)
    in_tree = np.empty(G.n_vertices, dtype=np.bool_)
    state = np.uint64(_stream_start(np.uint64(seed % 2**64), np.uint64(index)))
    _wilson(nbr, bedge, state, parent, in_tree)
    return SpanningForest(tuple(int(p) for p in parent))


def _pairing_from_exits(exits, marked) -> LinkPattern | None:
    pos = {e: i for i, e in enumerate(marked)}
    links, used = [], set()
    for k, e in enumerate(exits):
        b = pos.get(int(e))
        if b is None or b % 2 == 0 or b in used:
            return None
        used.add(b)
        links.append((2 * k + 1, b + 1))
    try:
        return LinkPattern(tuple(links))
    except ValueError:
        return None


def detect_connectivity(F: SpanningForest, G: GridDomain, marked=None) -> ConnectivityOutcome:
    """Trace the branches from the odd marked edges' interior vertices.

    ``Conn`` holds when they exit through the even marked edges, each through
    a different one; the pairing is then returned as a link pattern.
    """
    marked = G.marked if marked is None else tuple(marked)
    exits = [F.exit_edge(G.boundary_edges[e][0]) for e in marked[0::2]]
    pairing = _pairing_from_exits(exits, marked)
    return ConnectivityOutcome(pairing is not None, pairing)


def _default_threads() -> int:
    return max(1, int(os.environ.get("USTFUSION_THREADS", os.cpu_count() or 1)))


def wilson_batch(G: GridDomain, seed: int, n: int, first: int = 0, workers: int | None = None):
    """Exit edges of the odd-edge branches for samples ``first .. first + n - 1``."""
    nbr, bedge = _tables(G)
    sources = np.array([G.boundary_edges[e][0] for e in G.marked[0::2]], dtype=np.int64)
    seed = np.uint64(seed % 2**64)
    workers = _default_threads() if workers is None else workers
    if workers <= 1 or n < 2 * workers:
        return _batch(nbr, bedge, seed, np.uint64(first), n, sources)
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(np.arange(first, first + n), workers)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(lambda c: _batch(nbr, bedge, seed, np.uint64(c[0]), len(c), sources),
                            [c for c in chunks if len(c)]))
    return np.concatenate(parts)


def _outcome_codes(exits: np.ndarray, marked, patterns) -> np.ndarray:
    """Index into ``patterns`` for each sample, or -1 when Conn fails."""
    table = {}
    for idx, beta in enumerate(patterns):
        partner = beta.partner
        key = tuple(marked[partner[a] - 1] for a in range(1, len(marked) + 1, 2))
        table[key] = idx
    codes = np.full(exits.shape[0], -1, dtype=np.int64)
    uniq, inverse = np.unique(exits, axis=0, return_inverse=True)
    mapped = np.array([table.get(tuple(int(e) for e in row), -1) for row in uniq], dtype=np.int64)
    if len(uniq):
        codes = mapped[inverse.reshape(-1)]
    return codes


def mc_estimate(G: GridDomain, valences, alpha, n: int, seed: int, workers: int | None = None) -> dict:
    """Monte Carlo estimate of ``P[Conn(iota(alpha))]`` with its binomial standard error."""
    valences = tuple(valences)
    if isinstance(alpha, ValencedLinkPattern):
        beta = unfuse(alpha)
    else:
        beta = alpha
    patterns = enumerate_link_patterns(len(G.marked) // 2)
    exits = wilson_batch(G, seed, n, workers=workers)
    codes = _outcome_codes(exits, G.marked, patterns)
    hits = int(np.sum(codes == patterns.index(beta)))
    p = hits / n
    return {"estimate": p, "stderr": math.sqrt(p * (1 - p) / n), "hits": hits,
            "n": n, "seed": seed}


def mc_frequencies(G: GridDomain, n: int, seed: int, workers: int | None = None) -> dict:
    """Counts of every pairing (and of failures) over ``n`` samples."""
    patterns = enumerate_link_patterns(len(G.marked) // 2)
    codes = _outcome_codes(wilson_batch(G, seed, n, workers=workers), G.marked, patterns)
    counts = np.bincount(codes + 1, minlength=len(patterns) + 1)
    return {"none": int(counts[0]), **{patterns[i]: int(counts[i + 1]) for i in range(len(patterns))}}


# --- exact oracle --------------------------------------------------------------

def _reduced_laplacian(G: GridDomain, keep) -> np.ndarray:
    keep = list(keep)
    idx = {v: i for i, v in enumerate(keep)}
    L = 4 * np.eye(len(keep))
    for v in keep:
        x, y = G.coords(v)
        for dx, dy in _DIRS:
            if 0 <= x + dx < G.width and 0 <= y + dy < G.height:
                w = G.vertex(x + dx, y + dy)
                if w in idx:
                    L[idx[v], idx[w]] = -1
    return L


def _int_det(L: np.ndarray) -> int:
    if L.shape[0] == 0:
        return 1
    v = np.linalg.det(L)
    r = round(v)
    if abs(v - r) > 1e-6 * max(1.0, abs(v)) or abs(v) > 2**52:
        raise ValueError("spanning-tree count too large for the float oracle")
    return int(r)


def matrix_tree_count(G: GridDomain) -> int:
    """Number of wired spanning trees, by the Matrix-Tree theorem."""
    return _int_det(_reduced_laplacian(G, range(G.n_vertices)))


def _paths_to_exits(G: GridDomain, start: int, blocked: frozenset, targets: dict):
    """Self-avoiding interior paths from ``start`` leaving through a target edge.

    Yields ``(vertex set, exit edge)``; ``targets`` maps (vertex, step) to edge id.
    """
    path = [start]
    on = {start}

    def rec(v):
        x, y = G.coords(v)
        for dx, dy in _DIRS:
            if 0 <= x + dx < G.width and 0 <= y + dy < G.height:
                w = G.vertex(x + dx, y + dy)
                if w in on or w in blocked:
                    continue
                on.add(w)
                path.append(w)
                yield from rec(w)
                path.pop()
                on.discard(w)
            else:
                e = targets.get((v, (dx, dy)))
                if e is not None:
                    yield frozenset(path), e

    if start in blocked:
        return
    yield from rec(start)


def exact_enumeration_oracle(G: GridDomain, valences, alpha, max_vertices: int = 20) -> Fraction:
    """``P[Conn(iota(alpha))]`` from explicit branch enumeration and tree counting.

    Every tree realizing the event contains a unique family of disjoint
    branches from the odd marked edges to their partner even edges.  Trees
    containing a given family are counted by contracting the family into the
    wired boundary (Matrix-Tree theorem on the remaining vertices).
    """
    if G.n_vertices > max_vertices:
        raise ValueError(f"domain too large for the oracle ({G.n_vertices} > {max_vertices})")
    if isinstance(alpha, ValencedLinkPattern):
        beta = unfuse(alpha)
    elif isinstance(alpha, LinkPattern):
        beta = alpha
    else:
        beta = None
    marked = G.marked
    partner = beta.partner if beta is not None else None
    odd = list(range(1, len(marked) + 1, 2))

    @lru_cache(maxsize=None)
    def completions(used: frozenset) -> int:
        return _int_det(_reduced_laplacian(G, [v for v in range(G.n_vertices) if v not in used]))

    def rec(k, used, used_exits):
        if k == len(odd):
            return completions(used)
        a = odd[k]
        if partner is not None:
            allowed = [partner[a]]
        else:
            allowed = [b for b in range(2, len(marked) + 1, 2) if b not in used_exits]
        targets = {}
        for b in allowed:
            v, _, step = G.boundary_edges[marked[b - 1]]
            targets[(v, step)] = b
        total = 0
        start = G.boundary_edges[marked[a - 1]][0]
        for verts, b in _paths_to_exits(G, start, used, targets):
            if b in used_exits:
                continue
            total += rec(k + 1, used | verts, used_exits | {b})
        return total

    num = rec(0, frozenset(), frozenset())
    return Fraction(num, matrix_tree_count(G))


def enumerate_trees(G: GridDomain, limit: int = 10**7):
    """All wired spanning trees as parent tuples (brute force over parent choices)."""
    nbr, bedge = _tables(G)
    n = G.n_vertices
    if 4 ** n > limit * 16:
        raise ValueError("domain too large for brute-force enumeration")
    choices = []
    for v in range(n):
        choices.append([int(nbr[v, k]) if nbr[v, k] >= 0 else -1 - int(bedge[v, k]) for k in range(4)])
    for parent in itertools.product(*choices):
        ok = True
        for v in range(n):
            u, steps = v, 0
            while parent[u] >= 0:
                u = parent[u]
                steps += 1
                if steps > n:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            yield parent


def brute_force_oracle(G: GridDomain, valences, alpha) -> Fraction:
    """Event frequency over an exhaustive list of wired spanning trees."""
    beta = unfuse(alpha) if isinstance(alpha, ValencedLinkPattern) else alpha
    hits = total = 0
    for parent in enumerate_trees(G):
        total += 1
        out = detect_connectivity(SpanningForest(parent), G)
        if out.conn and (beta is None or out.pairing == beta):
            hits += 1
    return Fraction(hits, total)
