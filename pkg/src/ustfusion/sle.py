"""Driving-function simulation for fused multiple SLE(2) and drift checks.

Only driving functions and tracked boundary points are simulated: the
Loewner flow moves every tracked real point by ``2 / (g - X) dt``.  Paths use
Euler-Maruyama with Gaussian increments from a counter-based generator
(``numpy.random.Philox``) keyed by the seed, so a path is a pure function of
its inputs.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cft import partition_jets, second_order_bpz
from .combinat import LinkPattern, ValencedLinkPattern, unfuse
from .exactnum import ExactScalar, monomial_table
from .fomin import inverse_fomin_sum, tiling_weights
from .kernel import BoundaryConfig, build_fused_kernel

__all__ = [
    "KAPPA",
    "PathRecord",
    "DriftEvaluator",
    "drift_field",
    "watermelon_drift",
    "generator_residual",
    "simulate_driving",
    "simulate_batch",
    "martingale_variance",
]

KAPPA = 2.0
VARIANTS = ("local-fused", "watermelon", "simultaneous")


def _as_valenced(alpha, valences) -> ValencedLinkPattern:
    if isinstance(alpha, ValencedLinkPattern):
        return alpha
    if isinstance(alpha, LinkPattern):
        alpha = alpha.links
    return ValencedLinkPattern.from_links(tuple(valences), alpha)


def _check_growth(valences, j):
    if not 0 <= j < len(valences):
        raise IndexError(f"growth point {j} outside 0..{len(valences) - 1}")
    if valences[j] != 1:
        raise ValueError(f"growth point {j} has valence {valences[j]}; it must be 1")


def drift_field(alpha, valences, j: int, points) -> float:
    """``kappa d_j Z_alpha / Z_alpha`` at ``points`` (``j`` zero-based), from exact jets."""
    valences = tuple(valences)
    _check_growth(valences, j)
    alpha = _as_valenced(alpha, valences)
    cfg = BoundaryConfig(tuple(points), valences)
    table = monomial_table(1, 1)
    K = build_fused_kernel(cfg, table, [0 if i == j else None for i in range(cfg.d)])
    Z = inverse_fomin_sum(unfuse(alpha), K).value
    if Z.value == 0:
        raise ZeroDivisionError("partition function vanishes")
    return KAPPA * float(Z.c[1] / Z.c[0])


def generator_residual(alpha, valences, j: int, points) -> ExactScalar:
    """Second-order null-vector operator at point ``j`` (valence 1) applied to ``Z_alpha``."""
    valences = tuple(valences)
    _check_growth(valences, j)
    alpha = _as_valenced(alpha, valences)
    cfg = BoundaryConfig(tuple(points), valences)
    jet = partition_jets(cfg, 2, None, [alpha])[alpha]
    return second_order_bpz(jet, j, valences, cfg.points)


def watermelon_drift(points, j: int) -> np.ndarray:
    """``sum_{i != j} 2 / (x_j - x_i)`` for points of shape ``(..., N)``."""
    x = np.asarray(points, dtype=float)
    diff = x[..., j:j + 1] - x
    diff[..., j] = np.inf
    return np.sum(2.0 / diff, axis=-1)


class DriftEvaluator:
    """Vectorized float evaluation of ``kappa d_j Z_alpha / Z_alpha``.

    The derivative of a determinant in ``x_j`` (valence 1) raises the
    derivative order of the kernel row or column of that index by one.
    """

    def __init__(self, alpha, valences, j: int):
        self.valences = tuple(valences)
        _check_growth(self.valences, j)
        self.alpha = _as_valenced(alpha, self.valences)
        self.j = j
        self.groups = [g for g, s in enumerate(self.valences) for _ in range(s)]
        self.orders = [m for s in self.valences for m in range(s)]
        self.index = sum(self.valences[:j])  # zero-based unfused index of the growth point
        beta0 = unfuse(self.alpha)
        self.terms = [(b, c) for b, c in tiling_weights(beta0)]

    def _entries(self, x, orders):
        """Kernel entries (without the 1/pi) for points ``x`` of shape ``(R, d)``."""
        n = len(self.groups)
        pts = x[:, self.groups]
        R = x.shape[0]
        K = np.zeros((R, n, n))
        for a in range(n):
            for b in range(n):
                if self.groups[a] == self.groups[b]:
                    continue
                m1, m2 = orders[a], orders[b]
                p = m1 + m2 + 2
                K[:, a, b] = (-1) ** m2 * math.factorial(p - 1) / (pts[:, b] - pts[:, a]) ** p
        return K

    def __call__(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=float))
        K = self._entries(x, self.orders)
        bumped = list(self.orders)
        bumped[self.index] += 1
        dK = self._entries(x, bumped)
        a0 = self.index + 1
        Z = np.zeros(x.shape[0])
        dZ = np.zeros(x.shape[0])
        for beta, c in self.terms:
            rows = [a - 1 for a in beta.starts]
            cols = [b - 1 for b in beta.ends]
            M = K[:, rows][:, :, cols]
            Z += c * np.linalg.det(M)
            D = M.copy()
            if a0 in beta.starts:
                r = beta.starts.index(a0)
                D[:, r, :] = dK[:, self.index, cols]
            else:
                k = beta.ends.index(a0)
                D[:, :, k] = dK[:, rows, self.index]
            dZ += c * np.linalg.det(D)
        out = KAPPA * dZ / Z
        return out if np.ndim(points) > 1 else out[0]


@dataclass(frozen=True)
class PathRecord:
    """Times, driving values and tracked points of one simulated path.

    ``points[k]`` holds all ``d`` points at ``times[k]``; for the growth
    variants the growth coordinate is the driving function.
    """

    variant: str
    times: np.ndarray
    points: np.ndarray
    driving: tuple
    seed: int
    dt: float
    stop_reason: str
    drift_integral: np.ndarray = field(default=None, repr=False)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        d = self.points.shape[1]
        w.writerow(["t"] + [f"x{i + 1}" for i in range(d)])
        for t, row in zip(self.times, self.points):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"variant": self.variant, "seed": self.seed, "dt": self.dt, "steps": len(self.times) - 1,
                "final_time": float(self.times[-1]), "stop_reason": self.stop_reason,
                "driving": list(self.driving), "final_points": [float(v) for v in self.points[-1]]}


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def _drift_fn(variant, alpha, valences, j, d):
    if variant == "local-fused":
        ev = DriftEvaluator(alpha, valences, j)
        return lambda x: ev(x)
    if variant == "watermelon":
        return lambda x: watermelon_drift(x, j)
    raise ValueError(f"unknown variant {variant!r}")


def _simulate(variant, x0, dt, horizon, rng_or_none, alpha=None, valences=None, j=0, noise=True,
              n_tracked=0):
    """Batched Euler-Maruyama; ``x0`` has shape ``(R, d)``.

    For simultaneous growth the last ``n_tracked`` columns are passive test
    points moved by the averaged Loewner flow.
    """
    x = np.array(x0, dtype=float)
    R, d = x.shape
    d -= n_tracked
    kappa = KAPPA
    gap_stop = 10 * math.sqrt(kappa * dt)
    n_steps = int(round(horizon / dt))
    path = [x.copy()]
    times = [0.0]
    drift_int = np.zeros(R)
    reason = "horizon"
    alive = np.ones(R, dtype=bool)
    if variant == "simultaneous":
        driving = tuple(range(d))
    else:
        driving = (j,)
        drift = _drift_fn(variant, alpha, valences, j, d)
    others = [i for i in range(d) if i != j]
    for step in range(n_steps):
        if variant == "simultaneous":
            X = x[:, :d]
            diff = X[:, :, None] - X[:, None, :]
            np.einsum("rii->ri", diff)[:] = np.inf
            b = np.sum(4.0 / diff, axis=2) / d
            dB = rng_or_none.standard_normal((R, d)) if noise else np.zeros((R, d))
            x_new = x.copy()
            x_new[:, :d] = X + math.sqrt(kappa / d * dt) * dB + b * dt
            if n_tracked:
                Z = x[:, d:]
                x_new[:, d:] = Z + np.sum(2.0 / (Z[:, :, None] - X[:, None, :]), axis=2) / d * dt
        else:
            b = drift(x)
            dB = rng_or_none.standard_normal(R) if noise else np.zeros(R)
            x_new = x.copy()
            x_new[:, others] += 2.0 / (x[:, others] - x[:, [j]]) * dt
            x_new[:, j] += math.sqrt(kappa * dt) * dB + b * dt
            drift_int += np.where(alive, b * dt, 0.0)
        x = np.where(alive[:, None], x_new, x)
        path.append(x.copy())
        times.append((step + 1) * dt)
        if variant == "simultaneous":
            gaps = np.diff(np.sort(x, axis=1), axis=1).min(axis=1) if x.shape[1] > 1 else np.full(R, np.inf)
        else:
            gaps = np.abs(x[:, others] - x[:, [j]]).min(axis=1) if others else np.full(R, np.inf)
        alive &= gaps >= gap_stop
        if not alive.any():
            reason = "collision"
            break
    return np.array(times), np.stack(path, axis=1), driving, drift_int, alive, reason


def simulate_driving(variant: str, points, dt: float = 1e-5, horizon: float = 0.05, seed: int = 0,
                     alpha=None, valences=None, j: int = 0, noise: bool = True,
                     tracked=()) -> PathRecord:
    """Simulate one path.

    ``local-fused`` grows from point ``j`` (valence 1) with the drift of
    ``Z_alpha``; ``watermelon`` grows from ``x_j`` towards infinity;
    ``simultaneous`` moves every point with independent noise of variance
    ``kappa/N``.  The run stops when a gap to the growth point (any gap for
    simultaneous growth) drops below ``10 sqrt(kappa dt)``.  ``tracked``
    adds passive real test points to simultaneous growth; they are stored
    after the driving points.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; use one of {VARIANTS}")
    if dt <= 0 or horizon <= 0:
        raise ValueError("dt and horizon must be positive")
    if tracked and variant != "simultaneous":
        raise ValueError("extra tracked points apply to simultaneous growth only")
    x0 = np.array([[float(v) for v in points] + [float(v) for v in tracked]])
    if variant == "local-fused" and valences is None:
        raise ValueError("local-fused growth needs valences and a pattern")
    times, path, driving, dint, alive, reason = _simulate(
        variant, x0, dt, horizon, _rng(seed), alpha, valences, j, noise, len(tracked))
    if not alive[0]:
        reason = "collision"
        last = len(times) - 1
        while last > 0 and np.array_equal(path[0, last], path[0, last - 1]):
            last -= 1
        times, path = times[:last + 1], path[:, :last + 1]
    return PathRecord(variant, times, path[0], driving, seed, dt, reason, dint)


def simulate_batch(variant: str, points, runs: int, dt: float = 1e-4, horizon: float = 0.01,
                   seed: int = 0, alpha=None, valences=None, j: int = 0, workers: int = 1) -> dict:
    """Endpoints of ``runs`` independent paths (stopped paths frozen at the stop).

    Runs are split into chunks with their own generator keyed by
    ``seed + chunk``; the result depends on ``workers`` only through chunking,
    which is fixed at 1000 runs per chunk.
    """
    chunk = 1000
    starts = list(range(0, runs, chunk))

    def one(k):
        r = min(chunk, runs - starts[k])
        x0 = np.tile(np.array([float(v) for v in points]), (r, 1))
        times, path, _, dint, alive, _ = _simulate(variant, x0, dt, horizon, _rng(seed + k),
                                                   alpha, valences, j, True)
        return path[:, -1], dint, alive

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, range(len(starts))))
    else:
        parts = [one(k) for k in range(len(starts))]
    return {"final": np.concatenate([p[0] for p in parts]),
            "drift_integral": np.concatenate([p[1] for p in parts]),
            "alive": np.concatenate([p[2] for p in parts]),
            "horizon": horizon, "runs": runs, "seed": seed, "dt": dt}


def martingale_variance(batch: dict, j: int, x0) -> dict:
    """Sample variance of ``X_T - X_0 - int drift`` over paths alive at ``T``.

    For the driving SDE this equals ``kappa T``; the standard error of a
    Gaussian sample variance is ``kappa T sqrt(2 / (n - 1))``.
    """
    alive = batch["alive"]
    m = batch["final"][alive, j] - float(x0[j]) - batch["drift_integral"][alive]
    n = int(alive.sum())
    var = float(np.var(m, ddof=1))
    target = KAPPA * batch["horizon"]
    se = target * math.sqrt(2.0 / (n - 1))
    return {"variance": var, "target": target, "stderr": se, "z": (var - target) / se, "n": n}
