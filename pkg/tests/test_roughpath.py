from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from roughns import roughpath as rp


def _enumerate_pvar(values: np.ndarray, p: float) -> float:
    """Brute force over every partition of the sample indices."""
    n = len(values)
    best = 0.0
    inner = range(1, n - 1)
    for r in range(n - 1):
        for cut in itertools.combinations(inner, r):
            pts = (0,) + cut + (n - 1,)
            total = sum(np.linalg.norm(values[b] - values[a]) ** p for a, b in zip(pts[:-1], pts[1:]))
            best = max(best, total)
    return best ** (1 / p)


def _midpoint_level2(path: rp.SamplePath, h: float) -> np.ndarray:
    """``int_0^T (z_r - z_0) (x) dz_r`` by the midpoint rule on a uniform mesh."""
    t0, t1 = path.horizon
    r = np.arange(t0, t1 + h / 2, h)
    z = path(r)
    mid = 0.5 * (z[:-1] + z[1:]) - z[0]
    dz = np.diff(z, axis=0)
    return mid.T @ dz


# -- lifts ---------------------------------------------------------------------
def test_linear_segment_lift():
    lift = rp.lift_piecewise_linear(rp.SamplePath([0.0, 1.0], [[0.0, 0.0], [1.0, 2.0]]))
    np.testing.assert_allclose(lift.Z(0, 1), [1.0, 2.0])
    np.testing.assert_allclose(lift.ZZ(0, 1), [[0.5, 1.0], [1.0, 2.0]])


def test_constant_path_lift_vanishes():
    lift = rp.lift_piecewise_linear(rp.SamplePath([0.0, 0.5, 1.0], np.ones((3, 2))))
    assert np.all(lift.Z(0.1, 0.9) == 0)
    assert np.all(lift.ZZ(0.1, 0.9) == 0)


def test_two_segment_lift_against_midpoint_quadrature():
    path = rp.SamplePath([0.0, 1.0, 2.0], [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    oracle = _midpoint_level2(path, 1e-4)
    lift = rp.lift_piecewise_linear(path)
    np.testing.assert_allclose(lift.ZZ(0, 2), oracle, atol=1e-10)
    assert lift.ZZ(0, 2)[0, 1] == pytest.approx(1.0)
    assert lift.ZZ(0, 2)[1, 0] == pytest.approx(0.0)


def test_lift_rejects_non_increasing_times():
    with pytest.raises(ValueError):
        rp.SamplePath([0.0, 1.0, 1.0], [[0.0], [1.0], [2.0]])


def test_lift_rejects_out_of_range():
    lift = rp.lift_piecewise_linear(rp.linear_path([1.0], T=1.0))
    with pytest.raises(ValueError):
        lift.Z(0.0, 2.0)


def test_chen_defect_zero_on_brownian_triples():
    lift = rp.lift_piecewise_linear(rp.sample_brownian(3, 2.0 ** -10, 3, 1.0))
    rng = np.random.default_rng(0)
    for s, th, t in np.sort(rng.uniform(0, 1, (100, 3)), axis=1):
        assert np.max(np.abs(rp.chen_defect(lift, s, th, t))) <= 1e-12


def test_chen_defect_detects_corruption():
    lift = rp.lift_piecewise_linear(rp.sample_brownian(1, 0.125, 2, 1.0))

    class Corrupted:
        def Z(self, s, t):
            return lift.Z(s, t)

        def ZZ(self, s, t):
            out = lift.ZZ(s, t)
            if (s, t) == (0.0, 1.0):
                out = out.copy()
                out[0, 1] += 1.0
            return out

    defect = rp.chen_defect(Corrupted(), 0.0, 0.5, 1.0)
    assert defect[0, 1] == pytest.approx(1.0)
    assert abs(defect[1, 0]) < 1e-12


def test_chen_defect_rejects_disorder():
    lift = rp.lift_piecewise_linear(rp.linear_path([1.0]))
    with pytest.raises(ValueError):
        rp.chen_defect(lift, 0.5, 0.2, 0.9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), K=st.integers(1, 3))
def test_lift_is_geometric(seed, K):
    lift = rp.lift_piecewise_linear(rp.sample_brownian(seed, 2.0 ** -6, K, 1.0))
    rng = np.random.default_rng(seed)
    s, t = np.sort(rng.uniform(0, 1, 2))
    Z, ZZ = lift.Z(s, t), lift.ZZ(s, t)
    np.testing.assert_allclose(0.5 * (ZZ + ZZ.T), 0.5 * np.outer(Z, Z), atol=1e-12)


# -- p-variation -------------------------------------------------------------------
def test_pvar_monotone_is_endpoint_increment():
    z = np.array([0.0, 0.3, 0.4, 1.5, 2.0])
    for p in (1.0, 2.0, 3.5):
        assert rp.p_variation(z, p) == pytest.approx(2.0)


def test_pvar_zigzag():
    z = np.array([0.0, 1.0, 0.0, 1.0])
    assert rp.p_variation(z, 1.0) == pytest.approx(3.0)
    oracle = _enumerate_pvar(z[:, None], 2.0)
    assert oracle == pytest.approx(math.sqrt(3.0))
    assert rp.p_variation(z, 2.0) == pytest.approx(oracle)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.floats(1.0, 4.0))
def test_pvar_matches_enumeration(seed, p):
    z = np.random.default_rng(seed).standard_normal((8, 2))
    assert rp.p_variation(z, p) == pytest.approx(_enumerate_pvar(z, p), rel=1e-12)


def test_pvar_callable_on_times():
    times = np.linspace(0, 1, 11)
    assert rp.p_variation(lambda s, t: 3 * (t - s), 2.0, times) == pytest.approx(3.0)


def test_pvar_rejects_small_p():
    with pytest.raises(ValueError):
        rp.p_variation(np.zeros(3), 0.5)


# -- controls ----------------------------------------------------------------------
def test_zero_lift_control():
    lift = rp.lift_piecewise_linear(rp.SamplePath([0.0, 1.0], [[1.0], [1.0]]))
    omega = rp.control_omega_Z(lift, 2.5, np.linspace(0, 1, 9))
    assert omega(0.0, 1.0) == 0.0


def test_linear_path_control_dominates():
    v = np.array([1.0, -2.0])
    lift = rp.lift_piecewise_linear(rp.linear_path(v, T=1.0))
    grid = np.linspace(0, 1, 17)
    omega = rp.control_omega_Z(lift, 2.0, grid)
    for i, s in enumerate(grid):
        for t in grid[i + 1:]:
            Z = v * (t - s)
            ZZ = 0.5 * np.outer(Z, Z)
            assert omega(s, t) >= (v @ v) * (t - s) ** 2 - 1e-12
            assert omega(s, t) >= np.linalg.norm(Z) ** 2 - 1e-12
            assert omega(s, t) >= np.linalg.norm(ZZ) - 1e-12


def test_control_superadditive_on_brownian():
    lift = rp.lift_piecewise_linear(rp.sample_brownian(5, 2.0 ** -8, 2, 1.0))
    omega = rp.control_omega_Z(lift, 2.5)
    grid = rp.dyadic_grid(lift.path)
    rng = np.random.default_rng(1)
    for _ in range(1000):
        s, th, t = np.sort(rng.choice(grid, 3))
        assert omega(s, th) + omega(th, t) <= omega(s, t) + 1e-12


def test_control_rejects_p_outside_range():
    lift = rp.lift_piecewise_linear(rp.linear_path([1.0]))
    with pytest.raises(ValueError):
        rp.control_omega_Z(lift, 3.0)


def test_rough_path_distance_zero_for_identical():
    lift = rp.lift_piecewise_linear(rp.sample_brownian(2, 2.0 ** -6, 2, 1.0))
    assert rp.rough_path_distance(lift, lift, 2.5, np.linspace(0, 1, 33)) == 0.0


# -- samplers --------------------------------------------------------------------------
def test_brownian_deterministic():
    a = rp.sample_brownian(42, 2.0 ** -8, 2, 1.0)
    b = rp.sample_brownian(42, 2.0 ** -8, 2, 1.0)
    assert np.array_equal(a.values, b.values)


def test_brownian_increment_variance():
    mesh = 2.0 ** -14
    z = rp.sample_brownian(7, mesh, 1, 1.0)
    inc = np.diff(z.values[:, 0])
    n = inc.size
    band = 3 * math.sqrt(2.0 / n)
    assert abs(inc.var() / mesh - 1) < min(0.05, band)


def test_brownian_zero_horizon():
    z = rp.sample_brownian(0, 0.1, 2, 0.0)
    assert z.times.size == 1
    lift = rp.lift_piecewise_linear(z)
    assert np.all(lift.Z(0.0, 0.0) == 0)


def test_fbm_covariance_limit():
    s = np.linspace(0, 1, 11)
    S, T = np.meshgrid(s, s)
    cov = rp.fbm_covariance(S, T, 0.5 + 1e-9)
    assert np.max(np.abs(cov - np.minimum(S, T))) <= 1e-6


def test_fbm_deterministic_and_variance():
    a = rp.sample_fbm(3, 2.0 ** -6, 2, 1.0, 0.7)
    b = rp.sample_fbm(3, 2.0 ** -6, 2, 1.0, 0.7)
    assert np.array_equal(a.values, b.values)
    ends = np.array([rp.sample_fbm(seed, 0.125, 1, 1.0, 0.7).values[-1, 0] for seed in range(10_000)])
    assert abs(ends.var() - 1.0) < 0.05


@pytest.mark.parametrize("H", [0.5, 1.0, 0.2])
def test_fbm_rejects_hurst(H):
    with pytest.raises(ValueError):
        rp.sample_fbm(0, 0.1, 1, 1.0, H)


def test_path_csv_roundtrip(tmp_path):
    z = rp.sample_brownian(4, 0.125, 3, 1.0)
    rp.write_path_csv(z, tmp_path / "z.csv")
    back = rp.read_path_csv(tmp_path / "z.csv")
    assert np.array_equal(back.times, z.times)
    assert np.array_equal(back.values, z.values)
    assert (tmp_path / "z.csv").read_text().splitlines()[0] == "t,z1,z2,z3"
