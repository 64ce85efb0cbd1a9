import csv
import io
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ustfusion.combinat import enumerate_valenced
from ustfusion.sle import (
    DriftEvaluator,
    drift_field,
    generator_residual,
    martingale_variance,
    simulate_batch,
    simulate_driving,
    watermelon_drift,
)

CASES = [((1, 1), 0), ((1, 1, 1, 1), 1), ((2, 1, 1), 1), ((1, 2, 1), 2), ((1, 1, 2, 1, 1), 4), ((3, 1, 1, 1), 3)]


def _points(d, rng):
    return sorted(Fraction(int(v), 13) for v in rng.choice(np.arange(-80, 80), size=d, replace=False))


def test_single_link_drift():
    (alpha,) = enumerate_valenced((1, 1))
    assert drift_field(alpha, (1, 1), 0, (0, 1)) == 4.0
    assert drift_field(alpha, (1, 1), 1, (0, 1)) == -4.0
    assert DriftEvaluator(alpha, (1, 1), 0)([0.0, 2.0]) == pytest.approx(2.0)


@pytest.mark.parametrize("vals, j", CASES)
def test_float_drift_matches_exact(vals, j):
    rng = np.random.default_rng(len(vals) + j)
    for _ in range(3):
        pts = _points(len(vals), rng)
        for alpha in enumerate_valenced(vals):
            exact = drift_field(alpha, vals, j, pts)
            approx = DriftEvaluator(alpha, vals, j)([float(p) for p in pts])
            assert approx == pytest.approx(exact, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("vals, j", CASES)
def test_generator_annihilates_partition_functions(vals, j):
    rng = np.random.default_rng(7 * len(vals) + j)
    pts = _points(len(vals), rng)
    for alpha in enumerate_valenced(vals):
        assert generator_residual(alpha, vals, j, pts).is_zero()


def test_growth_point_must_be_simple():
    (alpha,) = enumerate_valenced((2, 1, 1))
    with pytest.raises(ValueError):
        drift_field(alpha, (2, 1, 1), 0, (0, 1, 2))
    with pytest.raises(IndexError):
        DriftEvaluator(alpha, (2, 1, 1), 3)


def test_watermelon_is_limit_of_far_fused_point():
    (w,) = enumerate_valenced((1, 1, 1, 3))
    base = watermelon_drift([0.0, 0.5, 2.0], 1)
    gaps = [abs(drift_field(w, (1, 1, 1, 3), 1, (0, Fraction(1, 2), 2, X)) - base) for X in (10**2, 10**3, 10**4)]
    assert gaps[-1] < 1e-3
    assert gaps[0] / gaps[1] == pytest.approx(10, rel=0.1)


def test_drift_covariance():
    for vals, j in CASES[1:4]:
        ev = [DriftEvaluator(a, vals, j) for a in enumerate_valenced(vals)]
        x = np.linspace(-1.0, 2.0, len(vals)) + np.arange(len(vals)) ** 2 * 0.1
        for f in ev:
            assert f(x + 3.7) == pytest.approx(f(x), rel=1e-10)
            assert f(2.5 * x) == pytest.approx(f(x) / 2.5, rel=1e-10)


def test_zero_noise_symmetric_growth():
    rec = simulate_driving("simultaneous", [-1.0, -0.25, 0.25, 1.0], dt=1e-4, horizon=0.02, noise=False)
    last = rec.points[-1]
    assert np.allclose(last, -last[::-1], atol=1e-14)
    assert last[0] < -1 and last[-1] > 1


def test_simultaneous_first_order_in_dt():
    x0 = [-1.0, 0.0, 0.7]
    tracked = [1.5, -2.0]
    horizon, d = 0.1, 3

    def rhs(_, y):
        X, Z = y[:d], y[d:]
        diff = X[:, None] - X[None, :]
        np.fill_diagonal(diff, np.inf)
        return np.concatenate([np.sum(4.0 / diff, axis=1) / d, np.sum(2.0 / (Z[:, None] - X[None, :]), axis=1) / d])

    ref = solve_ivp(rhs, (0, horizon), x0 + tracked, rtol=1e-12, atol=1e-12).y[:, -1]
    errs = []
    for dt in (1e-3, 5e-4, 2.5e-4):
        rec = simulate_driving("simultaneous", x0, dt=dt, horizon=horizon, noise=False, tracked=tracked)
        errs.append(np.abs(rec.points[-1] - ref).max())
    assert errs[0] / errs[1] == pytest.approx(2, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(2, rel=0.1)


def test_paths_are_reproducible():
    (alpha,) = enumerate_valenced((2, 1, 1))
    kw = dict(dt=1e-4, horizon=0.005, alpha=alpha, valences=(2, 1, 1), j=1)
    a = simulate_driving("local-fused", [0.0, 1.0, 3.0], seed=4, **kw)
    b = simulate_driving("local-fused", [0.0, 1.0, 3.0], seed=4, **kw)
    c = simulate_driving("local-fused", [0.0, 1.0, 3.0], seed=5, **kw)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.points[-1, 0] < 0  # the passive point is pushed away


def test_path_record_csv():
    rec = simulate_driving("watermelon", [0.0, 1.0, 2.5], dt=1e-3, horizon=0.01, seed=2, j=1)
    rows = list(csv.reader(io.StringIO(rec.to_csv())))
    assert rows[0] == ["t", "x1", "x2", "x3"]
    assert len(rows) == len(rec.times) + 1
    assert np.allclose(np.array(rows[1:], dtype=float)[:, 1:], rec.points)
    info = rec.to_dict()
    assert info["steps"] == 10 and info["stop_reason"] == "horizon" and info["driving"] == [1]


def test_collision_stops_the_run():
    rec = simulate_driving("simultaneous", [0.0, 0.05], dt=1e-4, horizon=1.0, seed=1)
    assert rec.stop_reason == "collision"
    assert np.diff(rec.points[-1])[0] >= 0


def test_invalid_arguments():
    with pytest.raises(ValueError):
        simulate_driving("radial", [0.0, 1.0])
    with pytest.raises(ValueError):
        simulate_driving("watermelon", [0.0, 1.0], dt=-1)
    with pytest.raises(ValueError):
        simulate_driving("local-fused", [0.0, 1.0])


def test_martingale_variance():
    (alpha,) = [a for a in enumerate_valenced((1, 2, 1)) if a.count(1, 2) == 1]
    x0 = [0.0, 1.0, 2.0]
    batch = simulate_batch("local-fused", x0, 4000, dt=1e-4, horizon=0.01, seed=3, alpha=alpha,
                           valences=(1, 2, 1), j=0)
    out = martingale_variance(batch, 0, x0)
    assert out["n"] > 3900
    assert abs(out["z"]) < 3


def test_batch_independent_of_workers():
    x0 = [0.0, 1.0, 2.5]
    a = simulate_batch("watermelon", x0, 1500, horizon=0.002, seed=8, j=0)
    b = simulate_batch("watermelon", x0, 1500, horizon=0.002, seed=8, j=0, workers=2)
    assert np.array_equal(a["final"], b["final"])
