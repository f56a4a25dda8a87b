"""Sampled paths, their canonical level-2 lifts, p-variation and controls.

A driver is always stored as a piecewise-linear backbone.  Its lift
``(Z, ZZ)`` is exact: on a single linear segment ``ZZ_st = 1/2 dz (x) dz``
and across breakpoints the pieces are glued with Chen's relation.

Index convention: ``ZZ[j, k]_st = int_s^t (z^j_r - z^j_s) dz^k_r``.
"""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg


@dataclass(frozen=True)
class SamplePath:
    """Samples ``values[i] = z(times[i])`` of a K-dimensional path."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != times.shape[0]:
            raise ValueError(
                f"{times.shape[0]} times but {values.shape[0]} sample rows")
        if times.size == 0:
            raise ValueError("a path needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("path samples must be finite")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def __call__(self, t):
        """Piecewise-linear interpolation, shape ``t.shape + (K,)``."""
        t = np.asarray(t, dtype=float)
        out = np.stack([np.interp(t, self.times, self.values[:, k])
                        for k in range(self.dim)], axis=-1)
        return out

    def slopes(self) -> np.ndarray:
        """Constant derivative on each segment, shape ``(M, K)``."""
        return np.diff(self.values, axis=0) / np.diff(self.times)[:, None]

    def restrict(self, a: float, b: float) -> "SamplePath":
        """Sub-path on ``[a, b]`` with the interpolated endpoints added."""
        t0, t1 = self.horizon
        if not (t0 - 1e-12 <= a < b <= t1 + 1e-12):
            raise ValueError(f"[{a}, {b}] is not inside [{t0}, {t1}]")
        inner = (self.times > a) & (self.times < b)
        times = np.concatenate([[a], self.times[inner], [b]])
        return SamplePath(times, self(times))

    def shifted(self, h: float) -> "SamplePath":
        """The path ``r -> z(r + h)``, starting at time ``t0 - h``."""
        return SamplePath(self.times - h, self.values)

    def subsample(self, step: int) -> "SamplePath":
        """Keep every ``step``-th sample (the last sample must be kept)."""
        if (self.times.size - 1) % step:
            raise ValueError(
                f"{self.times.size - 1} segments are not divisible by {step}")
        return SamplePath(self.times[::step], self.values[::step])

    def scaled(self, factor: float) -> "SamplePath":
        return SamplePath(self.times, self.values * factor)


def linear_path(direction, T: float = 1.0, n: int = 1) -> SamplePath:
    """``z_t = t * direction`` sampled on ``n`` equal segments."""
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    times = np.linspace(0.0, T, n + 1)
    return SamplePath(times, times[:, None] * direction[None, :])


def smooth_path(func, mesh: float, T: float) -> SamplePath:
    """Sample a smooth callable ``func(t) -> (K,)`` on a uniform grid."""
    n = _segments(mesh, T)
    times = np.linspace(0.0, T, n + 1)
    values = np.asarray([np.atleast_1d(func(t)) for t in times], dtype=float)
    return SamplePath(times, values)


def _segments(mesh: float, T: float) -> int:
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    n = int(round(T / mesh))
    if abs(n * mesh - T) > 1e-9 * max(T, mesh):
        raise ValueError(f"mesh {mesh} does not divide T={T}")
    return n


def sample_brownian(seed: int, mesh: float, K: int, T: float) -> SamplePath:
    """Standard K-dimensional Brownian motion on the grid ``0, mesh, ..., T``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    n = _segments(mesh, T)
    rng = np.random.default_rng(seed)
    increments = rng.normal(0.0, np.sqrt(mesh), size=(n, K))
    values = np.vstack([np.zeros((1, K)), np.cumsum(increments, axis=0)])
    return SamplePath(np.linspace(0.0, T, n + 1), values)


def fbm_covariance(s, t, H: float):
    """``E[B^H_s B^H_t] = 1/2 (s^2H + t^2H - |t-s|^2H)``."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return 0.5 * (s ** (2 * H) + t ** (2 * H) - np.abs(t - s) ** (2 * H))


@functools.lru_cache(maxsize=16)
def _fgn_factor(n: int, H: float) -> np.ndarray:
    lag = np.arange(n, dtype=float)
    rho = 0.5 * (np.abs(lag + 1) ** (2 * H) + np.abs(lag - 1) ** (2 * H)
                 - 2 * lag ** (2 * H))
    return linalg.cholesky(linalg.toeplitz(rho), lower=True)


def sample_fbm(seed: int, mesh: float, K: int, T: float, H: float) -> SamplePath:
    """Fractional Brownian motion with Hurst index ``H`` in (1/2, 1).

    Exact on the grid: unit fractional Gaussian noise is drawn through the
    Cholesky factor of its Toeplitz covariance and rescaled by ``mesh**H``.
    """
    if not 0.5 < H < 1.0:
        raise ValueError(f"unsupported Hurst parameter H={H}; need 1/2 < H < 1")
    if K < 1:
        raise ValueError("K must be >= 1")
    n = _segments(mesh, T)
    times = np.linspace(0.0, T, n + 1)
    if n == 0:
        return SamplePath(times, np.zeros((1, K)))
    rng = np.random.default_rng(seed)
    noise = _fgn_factor(n, float(H)) @ rng.standard_normal((n, K))
    values = np.vstack([np.zeros((1, K)), np.cumsum(noise * mesh ** H, axis=0)])
    return SamplePath(times, values)


class RoughPathLift:
    """Canonical lift of the piecewise-linear interpolation of a path."""

    def __init__(self, path: SamplePath):
        self.path = path
        dz = np.diff(path.values, axis=0)
        rel = path.values - path.values[0]
        # level two from the first sample to every breakpoint, glued by Chen
        seg = rel[:-1, :, None] * dz[:, None, :] + 0.5 * dz[:, :, None] * dz[:, None, :]
        self._level2 = np.concatenate(
            [np.zeros((1,) + seg.shape[1:]), np.cumsum(seg, axis=0)])
        self._rel = rel

    @property
    def dim(self) -> int:
        return self.path.dim

    @property
    def times(self) -> np.ndarray:
        return self.path.times

    def _check(self, s, t):
        t0, t1 = self.path.horizon
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(s > t):
            raise ValueError("need s <= t")
        if np.any(s < t0 - 1e-12) or np.any(t > t1 + 1e-12):
            raise ValueError(f"evaluation outside the horizon [{t0}, {t1}]")
        return s, t

    def _from_start(self, t):
        """``(z_t - z_0, ZZ_{0t})`` for an array of times."""
        times = self.path.times
        i = np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 1)
        x = self.path(t) - self.path.values[0]
        d = x - self._rel[i]
        a = self._rel[i]
        zz = (self._level2[i] + a[..., :, None] * d[..., None, :]
              + 0.5 * d[..., :, None] * d[..., None, :])
        return x, zz

    def Z(self, s, t) -> np.ndarray:
        s, t = self._check(s, t)
        return self.path(t) - self.path(s)

    def ZZ(self, s, t) -> np.ndarray:
        s, t = self._check(s, t)
        xs, zs = self._from_start(s)
        xt, zt = self._from_start(t)
        return zt - zs - xs[..., :, None] * (xt - xs)[..., None, :]

    def increment(self, s: float, t: float) -> "DriverIncrement":
        return DriverIncrement(float(s), float(t), self.Z(s, t), self.ZZ(s, t))

    def level2_norms(self, times: np.ndarray) -> np.ndarray:
        """Frobenius norms ``|ZZ_{t_i t_j}|`` for all pairs of ``times``."""
        s = np.asarray(times)[:, None]
        t = np.asarray(times)[None, :]
        ss, tt = np.broadcast_arrays(s, t)
        lo = np.minimum(ss, tt)
        hi = np.maximum(ss, tt)
        return np.linalg.norm(self.ZZ(lo, hi), axis=(-2, -1))


@dataclass(frozen=True)
class DriverIncrement:
    """Lift evaluated on one interval: ``Z_st`` in R^K and ``ZZ_st`` in R^{KxK}."""

    s: float
    t: float
    Z: np.ndarray
    ZZ: np.ndarray

    @classmethod
    def zero(cls, K: int, s: float = 0.0, t: float = 0.0) -> "DriverIncrement":
        return cls(s, t, np.zeros(K), np.zeros((K, K)))


def lift_piecewise_linear(path: SamplePath) -> RoughPathLift:
    return RoughPathLift(path)


def chen_defect(lift, s: float, theta: float, t: float) -> np.ndarray:
    """``ZZ_st - ZZ_s.theta - ZZ_theta.t - Z_s.theta (x) Z_theta.t``."""
    if not s <= theta <= t:
        raise ValueError(f"need s <= theta <= t, got ({s}, {theta}, {t})")
    delta = lift.ZZ(s, t) - lift.ZZ(s, theta) - lift.ZZ(theta, t)
    return delta - np.outer(lift.Z(s, theta), lift.Z(theta, t))


def _pvar_sums(dist_p: np.ndarray) -> np.ndarray:
    """Best partition sums from index 0: ``best[j] = max_i best[i] + dist_p[i, j]``."""
    n = dist_p.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + dist_p[:j, j])
    return best


def _pvar_table(dist_p: np.ndarray) -> np.ndarray:
    """``V[s, t]``: best partition sum over grid partitions of ``[t_s, t_t]``."""
    n = dist_p.shape[0]
    V = np.zeros((n, n))
    lower = np.tril(np.ones((n, n), dtype=bool), -1)  # u < s masked out
    for t in range(1, n):
        cand = V[:, :t] + dist_p[None, :t, t]
        cand[lower[:, :t]] = -np.inf
        V[:t, t] = np.max(cand[:t], axis=1)
    return V


def increment_norms(values: np.ndarray) -> np.ndarray:
    """All-pairs Euclidean/Frobenius norms of ``values[j] - values[i]``."""
    v = np.asarray(values, dtype=float).reshape(len(values), -1)
    diff = v[None, :, :] - v[:, None, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def p_variation(g, p: float, times=None) -> float:
    """p-variation over partitions supported on a grid.

    ``g`` is either an ``(n, ...)`` array of path samples (increments
    ``x_j - x_i``) or a callable two-index map ``g(s, t)`` vectorized over
    arrays and evaluated on ``times``.  Precomputed norm matrices go through
    :func:`p_variation_norms`.

    Exact for grid-supported maps by dynamic programming.
    """
    if p < 1:
        raise ValueError(f"p-variation needs p >= 1, got {p}")
    if callable(g):
        if times is None:
            raise ValueError("a callable two-index map needs evaluation times")
        times = np.asarray(times, dtype=float)
        s, t = np.meshgrid(times, times, indexing="ij")
        lo, hi = np.minimum(s, t), np.maximum(s, t)
        vals = np.asarray(g(lo, hi))
        extra = vals.ndim - 2
        dist = np.sqrt(np.sum(vals.reshape(vals.shape[:2] + (-1,)) ** 2, axis=-1)) \
            if extra else np.abs(vals)
    else:
        dist = increment_norms(g)
    if dist.shape[0] < 2:
        return 0.0
    return float(_pvar_sums(dist ** p)[-1] ** (1.0 / p))


def p_variation_norms(dist: np.ndarray, p: float) -> float:
    """p-variation from a precomputed ``(n, n)`` matrix of increment norms."""
    if p < 1:
        raise ValueError(f"p-variation needs p >= 1, got {p}")
    dist = np.asarray(dist, dtype=float)
    if dist.shape[0] < 2:
        return 0.0
    return float(_pvar_sums(dist ** p)[-1] ** (1.0 / p))


class Control:
    """Tabulated control on a grid.

    Grid pairs are exact table entries; off-grid arguments are snapped
    outward to the enclosing grid cell, which keeps domination.
    """

    def __init__(self, times: np.ndarray, table: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.table = np.asarray(table, dtype=float)

    def _index(self, s, t):
        lo = np.clip(np.searchsorted(self.times, s + 1e-12, side="right") - 1,
                     0, self.times.size - 1)
        hi = np.clip(np.searchsorted(self.times, t - 1e-12, side="left"),
                     0, self.times.size - 1)
        return lo, hi

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if np.any(s > t):
            raise ValueError("need s <= t")
        i, j = self._index(s, t)
        out = self.table[i, j]
        return np.where(s == t, 0.0, out)

    def __add__(self, other: "Control") -> "Control":
        if not np.array_equal(self.times, other.times):
            raise ValueError("controls live on different grids")
        return Control(self.times, self.table + other.table)


def dyadic_grid(path: SamplePath, max_points: int = 257) -> np.ndarray:
    """Backbone times, thinned by a power of two to at most ``max_points``."""
    times = path.times
    step = 1
    while (times.size - 1) // step + 1 > max_points and (times.size - 1) % (2 * step) == 0:
        step *= 2
    if (times.size - 1) // step + 1 > max_points:
        # backbone not dyadic: fall back to an evenly spaced subgrid
        return np.linspace(times[0], times[-1], max_points)
    return times[::step]


def control_from_lift(lift: RoughPathLift, p: float, grid=None) -> Control:
    """``omega(s,t) = |Z|^p_{p-var;[s,t]} + |ZZ|^{p/2}_{p/2-var;[s,t]}``."""
    grid = dyadic_grid(lift.path) if grid is None else np.asarray(grid, dtype=float)
    z = lift.path(grid)
    level1 = increment_norms(z) ** p
    level2 = lift.level2_norms(grid) ** (p / 2)
    return Control(grid, _pvar_table(level1) + _pvar_table(level2))


def control_omega_Z(lift: RoughPathLift, p: float, grid=None) -> Control:
    """The control dominating ``|Z|^p`` and ``|ZZ|^{p/2}``; needs ``2 <= p < 3``."""
    if not 2 <= p < 3:
        raise ValueError(f"control_omega_Z needs 2 <= p < 3, got {p}")
    return control_from_lift(lift, p, grid)


def rough_path_distance(lift_a: RoughPathLift, lift_b: RoughPathLift, p: float,
                        grid=None) -> float:
    """``|Z - Z'|_{p-var} + |ZZ - ZZ'|_{p/2-var}`` over grid partitions."""
    if lift_a.dim != lift_b.dim:
        raise ValueError(f"lifts have K={lift_a.dim} and K={lift_b.dim}")
    grid = dyadic_grid(lift_a.path) if grid is None else np.asarray(grid, dtype=float)
    dz = lift_a.path(grid) - lift_b.path(grid)
    s, t = np.meshgrid(grid, grid, indexing="ij")
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    dzz = np.linalg.norm(lift_a.ZZ(lo, hi) - lift_b.ZZ(lo, hi), axis=(-2, -1))
    first = p_variation_norms(increment_norms(dz), p)
    second = p_variation_norms(dzz, p / 2) if p >= 2 else p_variation_norms(dzz, 1.0)
    return first + second


def write_path_csv(path: SamplePath, filename) -> None:
    filename = Path(filename)
    with filename.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"z{k + 1}" for k in range(path.dim)])
        for t, row in zip(path.times, path.values):
            writer.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])


def read_path_csv(filename) -> SamplePath:
    with Path(filename).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "t" or any(
                h != f"z{k + 1}" for k, h in enumerate(header[1:])):
            raise ValueError(f"bad path header {header!r}")
        rows = np.asarray([[float(x) for x in row] for row in reader if row])
    return SamplePath(rows[:, 0], rows[:, 1:])
