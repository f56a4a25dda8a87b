"""Verification studies over solved trajectories.

Remainders of the rough expansion, sewing of two-parameter germs, pressure
recovery, the 2D enstrophy balance, Wong-Zakai refinement, stability and
contraction runs, and rough Gronwall bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

from . import spectral as sp
from .drivers import VectorFieldFamily, mean_functionals
from .roughpath import (Control, RoughPathLift, SamplePath, lift_piecewise_linear,
                        rough_path_distance, sample_brownian)
from .solver import SolverConfig, Trajectory, reconstruct_velocity, solve
from .spectral import SpectralField, Torus


class SewingDivergence(RuntimeError):
    """Compensated Riemann sums stopped contracting under refinement."""

    def __init__(self, message, differences):
        super().__init__(message)
        self.differences = differences


# -- helpers ----------------------------------------------------------------
def _velocity_coefs(traj: Trajectory, idx) -> np.ndarray:
    return np.stack([traj.velocity(i).coef for i in idx])


def velocity_drift(T: Torus, u: np.ndarray, nu: float) -> np.ndarray:
    """``nu Lap u - P((u.grad)u)`` on band coefficients."""
    ug = T.to_grid(u)
    du = T.to_grid(T.grad(u))
    adv = T.from_grid(np.einsum("i...,ci...->c...", ug, du))
    return -nu * T.ksq * u - sp.leray_project(SpectralField(T, adv)).coef


def pressure_drift(T: Torus, u: np.ndarray) -> np.ndarray:
    """``-Q((u.grad)u)`` on band coefficients."""
    ug = T.to_grid(u)
    du = T.to_grid(T.grad(u))
    adv = T.from_grid(np.einsum("i...,ci...->c...", ug, du))
    return -sp.q_project(SpectralField(T, adv)).coef


def vorticity_drift(T: Torus, xi: np.ndarray, ubar: np.ndarray, nu: float) -> np.ndarray:
    """``nu Lap xi - L_u xi`` with ``u = K xi + ubar``."""
    from .solver import _VorticitySystem

    system = _VorticitySystem(T, VectorFieldFamily(T, []), nu)
    rest, _ = system.nonlinear(xi, ubar, np.zeros(0))
    return -nu * T.ksq * xi + rest


def _window(traj: Trajectory, s: float, t: float) -> np.ndarray:
    if s > t:
        raise ValueError(f"need s <= t, got [{s}, {t}]")
    if s < traj.times[0] - 1e-12 or t > traj.times[-1] + 1e-12:
        raise ValueError(f"[{s}, {t}] is outside the trajectory [{traj.times[0]}, {traj.times[-1]}]")
    i, j = traj.index(s), traj.index(t)
    return np.arange(i, j + 1)


def _simpson(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    if times.size == 1:
        return np.zeros_like(values[0])
    if times.size == 2:
        return 0.5 * (times[1] - times[0]) * (values[0] + values[1])
    if np.iscomplexobj(values):
        return (integrate.simpson(values.real, x=times, axis=0)
                + 1j * integrate.simpson(values.imag, x=times, axis=0))
    return integrate.simpson(values, x=times, axis=0)


def _cumulative_simpson(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Running Simpson integral along axis 0; complex data handled part by part."""
    if times.size == 1:
        return np.zeros_like(values)
    if times.size == 2:
        return np.stack([np.zeros_like(values[0]), 0.5 * (times[1] - times[0]) * (values[0] + values[1])])
    run = lambda v: integrate.cumulative_simpson(v, x=times, axis=0, initial=0.0)
    if np.iscomplexobj(values):
        return run(values.real) + 1j * run(values.imag)
    return run(values)


def fit_slope(x, y, min_points: int = 6) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.size < min_points:
        raise ValueError(f"slope fit needs at least {min_points} points, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("slope fit needs positive data")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# -- remainders ---------------------------------------------------------------
@dataclass(frozen=True)
class RemainderRecord:
    s: float
    t: float
    norm: float
    omega: float
    dt: float


def remainder_u_field(traj: Trajectory, fam: VectorFieldFamily, lift: RoughPathLift,
                      s: float, t: float) -> SpectralField:
    """``u_nat = du_st - int_s^t (nu Lap u - P(u.grad)u) dr - A1_st u_s - A2_st u_s``.

    The drift integral is composite Simpson on the stored samples in ``[s, t]``.
    """
    T = traj.torus
    idx = _window(traj, s, t)
    u = _velocity_coefs(traj, idx)
    drift = np.stack([velocity_drift(T, ui, traj.nu) for ui in u])
    inc = lift.increment(traj.times[idx[0]], traj.times[idx[-1]])
    out = u[-1] - u[0] - _simpson(drift, traj.times[idx])
    if fam.K:
        out = out - fam.A1_coef(inc, u[0], "velocity-P") - fam.A2_coef(inc, u[0], "velocity-P")
    return SpectralField(T, out)


def remainder_vorticity(traj: Trajectory, fam: VectorFieldFamily, lift: RoughPathLift,
                        s: float, t: float) -> tuple[SpectralField, np.ndarray]:
    """``(xi_nat, ubar_nat)``: vorticity remainder and mean remainder ``dubar - L1 - L2``."""
    if traj.kind != "vorticity":
        raise ValueError("vorticity remainder needs a vorticity trajectory")
    T = traj.torus
    idx = _window(traj, s, t)
    xi = traj.fields[idx]
    drift = np.stack([vorticity_drift(T, traj.fields[i], traj.u_bar[i], traj.nu) for i in idx])
    inc = lift.increment(traj.times[idx[0]], traj.times[idx[-1]])
    out = xi[-1] - xi[0] - _simpson(drift, traj.times[idx])
    ubar_nat = traj.u_bar[idx[-1]] - traj.u_bar[idx[0]]
    if fam.K:
        out = out - fam.A1_coef(inc, xi[0], "vorticity") - fam.A2_coef(inc, xi[0], "vorticity")
        v = reconstruct_velocity(traj.state(idx[0]))
        v = v.with_coef(v.coef - _mean_part(T, v.coef))
        L1, L2 = mean_functionals(fam, inc, v)
        ubar_nat = ubar_nat - L1 - L2
    return SpectralField(T, out), ubar_nat


def _mean_part(T: Torus, coef: np.ndarray) -> np.ndarray:
    out = np.zeros_like(coef)
    zero = (slice(None),) + (0,) * T.d
    out[zero] = coef[zero]
    return out


def _interval_omega(lift: RoughPathLift, s: float, t: float, p: float) -> float:
    inc = lift.increment(s, t)
    return float(np.linalg.norm(inc.Z) ** p + np.linalg.norm(inc.ZZ) ** (p / 2))


def remainder_u_natural(traj: Trajectory, fam: VectorFieldFamily, lift: RoughPathLift,
                        s: float, t: float, m: float = -2, p: float = 2.5,
                        control: Control | None = None) -> RemainderRecord:
    """Remainder record with the ``H^m`` norm (default ``m = -2``).

    ``omega`` is ``control(s, t)`` when a control is supplied, otherwise the
    single-interval value ``|Z_st|^p + |ZZ_st|^{p/2}``.
    """
    nat = remainder_u_field(traj, fam, lift, s, t)
    omega = control(s, t) if control is not None else _interval_omega(lift, s, t, p)
    return RemainderRecord(s, t, sp.sobolev_norm(nat, m), float(omega), t - s)


@dataclass
class RemainderScaling:
    sizes: np.ndarray
    mean_norms: np.ndarray
    counts: np.ndarray
    slope: float
    records: list = field(default_factory=list)


def remainder_scaling(traj: Trajectory, fam: VectorFieldFamily, lift: RoughPathLift,
                      sizes: Sequence[float], max_intervals: int = 64, m: float = -2,
                      p: float = 2.5, min_points: int = 6) -> RemainderScaling:
    """Average remainder norm over up to ``max_intervals`` disjoint intervals per size."""
    t0, t1 = traj.times[0], traj.times[-1]
    sizes = np.asarray(sorted(sizes), dtype=float)
    means, counts, records = [], [], []
    for h in sizes:
        n = min(max_intervals, int(math.floor((t1 - t0) / h + 1e-9)))
        if n < 1:
            raise ValueError(f"interval size {h} exceeds the trajectory horizon")
        recs = [remainder_u_natural(traj, fam, lift, t0 + j * h, t0 + (j + 1) * h, m, p)
                for j in range(n)]
        records.extend(recs)
        means.append(float(np.mean([r.norm for r in recs])))
        counts.append(n)
    means = np.asarray(means)
    return RemainderScaling(sizes, means, np.asarray(counts),
                            fit_slope(sizes, means, min_points), records)


# -- sewing -------------------------------------------------------------------
@dataclass
class SewingResult:
    value: np.ndarray
    levels: list
    differences: list
    converged: bool


def _riemann_sum(germ, points: np.ndarray):
    total = None
    for a, b in zip(points[:-1], points[1:]):
        h = np.asarray(germ(a, b))
        total = h.copy() if total is None else total + h
    return total


def _level_points(grid: np.ndarray, stride: int) -> np.ndarray:
    pts = grid[::stride]
    if pts[-1] != grid[-1]:
        pts = np.append(pts, grid[-1])
    return pts


def sewing_integrate(germ: Callable, grid, levels: int | None = None, tol: float = 1e-10) -> SewingResult:
    """Compensated Riemann sums of ``germ(s, t)`` over dyadic sub-partitions of ``grid``.

    ``grid`` is the finest admissible partition (e.g. stored trajectory times);
    level ``n`` keeps every ``2^(L-n)``-th point.  Cauchy differences between
    successive levels are reported; a difference that keeps growing over the
    last three levels raises :class:`SewingDivergence`.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing with at least two points")
    top = int(math.floor(math.log2(grid.size - 1)))
    L = top if levels is None else max(0, min(levels, top))
    sums, diffs = [], []
    for n in range(L + 1):
        sums.append(_riemann_sum(germ, _level_points(grid, 2 ** (L - n))))
        if n:
            diffs.append(float(np.max(np.abs(sums[-1] - sums[-2]))))
    scale = max(1.0, float(np.max(np.abs(sums[-1]))))
    if len(diffs) >= 3 and diffs[-1] > diffs[-2] > diffs[-3] and diffs[-1] > tol * scale:
        raise SewingDivergence("Cauchy differences grow under refinement", diffs)
    converged = bool(diffs) and diffs[-1] <= tol * scale
    return SewingResult(sums[-1], list(range(L + 1)), diffs, bool(converged))


# -- pressure -----------------------------------------------------------------
@dataclass
class PressureResult:
    times: np.ndarray
    pi: np.ndarray                      # (n, d, *spec)
    drift_part: np.ndarray
    rough_part: np.ndarray
    sector_defect: float
    sewing: SewingResult | None

    def field(self, i: int, T: Torus) -> SpectralField:
        return SpectralField(T, self.pi[i])


def pressure_recovery(traj: Trajectory, fam: VectorFieldFamily, lift: RoughPathLift | None,
                      tol: float = 1e-10) -> PressureResult:
    """``pi_t = -int_0^t Q((u.grad)u) dr + I_t`` with ``I`` sewn from ``A^{Q,1} u_s + A^{Q,2} u_s``.

    The drift integral is the cumulative composite Simpson rule on stored
    samples; the rough part is the compensated Riemann sum on stored times.
    """
    T = traj.torus
    n = len(traj)
    u = _velocity_coefs(traj, range(n))
    times = traj.times
    drift = np.stack([pressure_drift(T, ui) for ui in u])
    cum = _cumulative_simpson(drift, times)
    rough = np.zeros_like(cum)
    report = None
    if fam.K and lift is not None and n > 1:
        index = {float(t): i for i, t in enumerate(times)}

        def germ(a, b):
            inc = lift.increment(a, b)
            ua = u[index[float(a)]]
            return fam.A1_coef(inc, ua, "velocity-Q") + fam.A2_coef(inc, ua, "velocity-Q")

        pieces = np.stack([germ(a, b) for a, b in zip(times[:-1], times[1:])])
        rough[1:] = np.cumsum(pieces, axis=0)
        report = sewing_integrate(germ, times, tol=tol)
    pi = cum + rough
    defect = 0.0
    scale = max(math.sqrt(max(T.norm2(p) for p in pi)), 1e-300)
    for p in pi:
        defect = max(defect, math.sqrt(T.norm2(sp.leray_project(SpectralField(T, p)).coef)) / scale)
    return PressureResult(times.copy(), pi, cum, rough, defect, report)


# -- enstrophy ----------------------------------------------------------------
def enstrophy_balance_residual(traj: Trajectory, nu: float | None = None,
                               method: str = "stages") -> float:
    """``max_t | |xi_t|^2 + 2 nu int_0^t |grad xi|^2 - |xi_0|^2 | / |xi_0|^2``.

    ``method="stages"`` uses the dissipation accumulated by the stepper with
    its RK4 stage weights; ``"trapezoid"`` and ``"simpson"`` integrate the
    stored palinstrophy samples.
    """
    if traj.torus.d != 2:
        raise ValueError("enstrophy balance is a 2D statement; use stretching_budget in 3D")
    nu = traj.nu if nu is None else nu
    ens = traj.diagnostics["enstrophy"]
    pal = traj.diagnostics["palinstrophy"]
    t = traj.times
    if method == "stages":
        if nu != traj.nu:
            raise ValueError("stage quadrature is tied to the trajectory viscosity")
        diss = traj.dissipation
    elif method == "trapezoid":
        diss = 2 * nu * integrate.cumulative_trapezoid(pal, t, initial=0.0)
    elif method == "simpson":
        diss = 2 * nu * _cumulative_simpson(pal, t)
    else:
        raise ValueError(f"unknown quadrature {method!r}")
    if ens[0] == 0:
        return float(np.max(np.abs(ens + diss)))
    return float(np.max(np.abs(ens + diss - ens[0])) / ens[0])


def stretching_budget(traj: Trajectory) -> dict:
    """3D enstrophy budget ``|xi_t|^2 - |xi_0|^2 + 2 nu int |grad xi|^2`` per sample."""
    ens = traj.diagnostics["enstrophy"]
    budget = ens - ens[0] + traj.dissipation
    return {"times": traj.times.copy(), "budget": budget,
            "relative": budget / ens[0] if ens[0] else budget,
            "max_abs_relative": float(np.max(np.abs(budget)) / ens[0]) if ens[0] else 0.0}


# -- moving frame -------------------------------------------------------------
def moving_frame_shift(fam: VectorFieldFamily, noise: SamplePath, times) -> np.ndarray:
    """``S(t) = sum_k mean(sigma_k) (z^k_t - z^k_0)``, shape ``(n, d)``."""
    z = noise(np.asarray(times, float)) - noise.values[0]
    return z @ fam.mean


def shift_field(coef: np.ndarray, T: Torus, shift) -> np.ndarray:
    """Coefficients of ``x -> f(x + shift)``."""
    phase = np.exp(1j * sum(kk * s for kk, s in zip(T.k, shift)))
    return coef * phase


def moving_frame_error(xi0: SpectralField, ubar0, cfg: SolverConfig, fam: VectorFieldFamily,
                       noise: SamplePath) -> dict:
    """Compare the noisy run against the shifted deterministic run (constant sigma only)."""
    if not fam.is_constant():
        raise ValueError("moving-frame oracle needs spatially constant sigma")
    T = cfg.torus
    rough = solve(xi0, ubar0, cfg, fam, noise)
    det = solve(xi0, ubar0, cfg, None, None)
    common = [(i, j) for i, t in enumerate(rough.times)
              for j in [int(np.argmin(np.abs(det.times - t)))] if abs(det.times[j] - t) < 1e-9]
    shifts = moving_frame_shift(fam, noise, [rough.times[i] for i, _ in common])
    num = den = 0.0
    mean_err = 0.0
    for (i, j), S in zip(common, shifts):
        ref = shift_field(det.fields[j], T, S)
        num = max(num, T.norm2(rough.fields[i] - ref))
        den = max(den, T.norm2(ref))
        mean_err = max(mean_err, float(np.max(np.abs(rough.u_bar[i] - det.u_bar[j]))))
    return {"relative_error": math.sqrt(num / den) if den else math.sqrt(num),
            "mean_error": mean_err, "compared_samples": len(common)}


# -- Wong-Zakai and stability -------------------------------------------------
def _common_indices(a: Trajectory, b: Trajectory, tol: float = 1e-9):
    ia, ib = [], []
    j = 0
    for i, t in enumerate(a.times):
        while j < len(b) and b.times[j] < t - tol:
            j += 1
        if j < len(b) and abs(b.times[j] - t) <= tol:
            ia.append(i)
            ib.append(j)
    return np.asarray(ia), np.asarray(ib)


def trajectory_distance(a: Trajectory, b: Trajectory) -> dict:
    """``C_T H^0`` and ``L^2_T H^1`` velocity distances on common sample times."""
    T = a.torus
    ia, ib = _common_indices(a, b)
    if ia.size == 0:
        raise ValueError("trajectories share no sample times")
    h0, h1 = [], []
    for i, j in zip(ia, ib):
        diff = a.velocity(i).coef - b.velocity(j).coef
        h0.append(math.sqrt(T.norm2(diff)))
        h1.append(T.norm2(diff, 1))
    t = a.times[ia]
    l2h1 = math.sqrt(integrate.trapezoid(h1, t)) if t.size > 1 else math.sqrt(h1[0])
    return {"sup_h0": max(h0), "l2_h1": l2h1, "samples": int(ia.size)}


@dataclass
class WongZakaiTable:
    meshes: list
    sup_h0: list
    l2_h1: list
    monotone: bool
    final_ratio: float

    def rows(self):
        return list(zip(self.meshes, self.sup_h0, self.l2_h1))


def _nest(meshes: Sequence[float], ref: float) -> list[int]:
    steps = []
    for h in meshes:
        r = h / ref
        k = int(round(r))
        if abs(r - k) > 1e-9 or k < 1 or (k & (k - 1)):
            raise ValueError(f"mesh {h} is not a dyadic multiple of the reference {ref}")
        steps.append(k)
    return steps


def wong_zakai_study(bm_seed, meshes: Sequence[float], cfg: SolverConfig,
                     fam: VectorFieldFamily, xi0: SpectralField, ubar0,
                     reference: float | None = None, slack: float = 0.10) -> WongZakaiTable:
    """Solve with coarse interpolations of one Brownian sample and compare to the finest."""
    meshes = list(meshes)
    if len(meshes) < 1:
        raise ValueError("need at least one coarse mesh")
    ref = min(meshes) if reference is None else reference
    coarse = [h for h in meshes if h != ref] if reference is None else meshes
    steps = _nest(coarse, ref)
    bm = sample_brownian(bm_seed, ref, fam.K, cfg.T)
    reference_traj = solve(xi0, ubar0, cfg, fam, bm)
    sup, l2 = [], []
    for h, k in zip(coarse, steps):
        traj = reference_traj if k == 1 else solve(xi0, ubar0, cfg, fam, bm.subsample(k))
        dist = trajectory_distance(traj, reference_traj)
        sup.append(dist["sup_h0"])
        l2.append(dist["l2_h1"])
    order = np.argsort(coarse)[::-1]              # coarse to fine
    seq = [sup[i] for i in order]
    monotone = all(b <= (1 + slack) * a for a, b in zip(seq[:-1], seq[1:]))
    ratio = seq[-1] / seq[0] if seq and seq[0] > 0 else 0.0
    return WongZakaiTable([coarse[i] for i in order], seq, [l2[i] for i in order],
                          monotone, ratio)


def stability_study(base: SamplePath, perturbed: Sequence[SamplePath], cfg: SolverConfig,
                    fam: VectorFieldFamily, xi0: SpectralField, ubar0, p: float = 2.5,
                    grid_points: int = 129) -> list[dict]:
    """Rough-path distance against ``C_T H^0`` solution distance for each perturbation."""
    base_lift = lift_piecewise_linear(base)
    base_traj = solve(xi0, ubar0, cfg, fam, base)
    grid = np.linspace(0.0, cfg.T, grid_points)
    rows = []
    for path in perturbed:
        if path.dim != base.dim:
            raise ValueError(f"perturbed path has K={path.dim}, base has K={base.dim}")
        lift = lift_piecewise_linear(path)
        rp = rough_path_distance(base_lift, lift, p, grid)
        traj = solve(xi0, ubar0, cfg, fam, path)
        rows.append({"rough_path_distance": rp,
                     "solution_distance": trajectory_distance(traj, base_traj)["sup_h0"]})
    return rows


# -- contraction and a priori constants ------------------------------------------
def _fit_exp_constant(ratio_sq: float, growth: float) -> float:
    """Smallest ``C > 0`` with ``ratio_sq <= C exp(C growth)``."""
    if ratio_sq <= 0:
        return 0.0
    f = lambda c: math.log(c) + c * growth - math.log(ratio_sq)
    hi = max(1.0, ratio_sq)
    while f(hi) < 0:
        hi *= 2.0
    return float(optimize.brentq(f, 1e-300, hi, xtol=1e-14, rtol=1e-12))


@dataclass
class ContractionReport:
    epsilons: list
    sup_distances: list
    gronwall_constant: float
    linear_within: float

    @property
    def linear(self) -> bool:
        return self.linear_within <= 3.0


def contraction_study(xi0: SpectralField, ubar0, cfg: SolverConfig, fam: VectorFieldFamily,
                      noise: SamplePath | None, epsilons=(1e-2, 1e-3, 1e-4),
                      seed=0) -> ContractionReport:
    """Twin runs with ``|xi0 - xi0'|_0 = eps``; fits ``C`` in ``sup|dxi|^2 <= C eps^2 exp(C |xi0'|^2)``."""
    from .solver import random_vorticity

    T = cfg.torus
    base = solve(xi0, ubar0, cfg, fam, noise)
    direction = random_vorticity(T, 1.0, seed=seed, band=min(4, T.N))
    sups, consts = [], []
    for eps in epsilons:
        other = xi0 + direction * eps
        traj = solve(other, ubar0, cfg, fam, noise)
        ia, ib = _common_indices(base, traj)
        sup = max(math.sqrt(T.norm2(base.fields[i] - traj.fields[j])) for i, j in zip(ia, ib))
        sups.append(sup)
        consts.append(_fit_exp_constant((sup / eps) ** 2, sp.sobolev_norm(other, 0) ** 2))
    ratios = np.asarray(sups) / np.asarray(epsilons)
    return ContractionReport(list(epsilons), sups, max(consts),
                             float(ratios.max() / ratios.min()))


def mean_bound_constant(traj: Trajectory, p: float = 2.5) -> float:
    """Smallest ``C`` with ``sup|ubar| <= C exp(C (1 + sup|v|_1)^p) (1 + |ubar_0|)``."""
    T = traj.torus
    sup_mean = float(np.max(np.linalg.norm(traj.u_bar, axis=1)))
    sup_v = 0.0
    for i in range(len(traj)):
        v = traj.velocity(i).coef - _mean_part(T, traj.velocity(i).coef)
        sup_v = max(sup_v, math.sqrt(T.norm2(v, 1)))
    target = sup_mean / (1.0 + float(np.linalg.norm(traj.u_bar[0])))
    return _fit_exp_constant(target, (1.0 + sup_v) ** p)


@dataclass(frozen=True)
class GronwallReport:
    bound: float
    violated: bool
    max_ratio: float
    K: float


def rough_gronwall_bound(G, times, omega: Callable, L: float, kappa: float,
                         phi=None, K: float = 1.0) -> GronwallReport:
    """``2 exp(omega(0,T)/(L alpha)) (G_0 + K phi(0,T))`` with ``alpha = 1 v L^{-1}(2e^2)^{-kappa}``."""
    G = np.asarray(G, dtype=float)
    times = np.asarray(times, dtype=float)
    if G.shape != times.shape:
        raise ValueError("G and times must have the same length")
    s, t = float(times[0]), float(times[-1])
    alpha = max(1.0, (2.0 * math.e ** 2) ** (-kappa) / L)
    if phi is None:
        ph = 0.0
    elif callable(phi):
        ph = float(phi(s, t))
    else:
        ph = float(phi)
    bound = 2.0 * math.exp(float(omega(s, t)) / (L * alpha)) * (G[0] + K * ph)
    gmax = float(np.max(G))
    ratio = gmax / bound if bound > 0 else (math.inf if gmax > 0 else 0.0)
    return GronwallReport(bound, bool(gmax > bound), ratio, K)
