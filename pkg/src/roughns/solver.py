"""Galerkin solver for the vorticity + mean system, and its velocity-form twin.

The noise approximant is piecewise linear, so on each segment its derivative
``zdot`` is constant.  Every step lies inside one segment and uses
integrating-factor RK4 (Lawson): the diagonal part of the generator, i.e. the
viscous term ``-nu |k|^2`` and the transport by the spatially constant part of
each ``sigma_k``, is integrated exactly; everything else goes through
classical RK4.  The mean velocity rides along in the same stages.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate

from . import spectral as sp
from .drivers import VectorFieldFamily
from .roughpath import SamplePath
from .spectral import SpectralField, Torus


class HorizonReached(RuntimeError):
    """The vorticity exceeded the blow-up threshold; carries the last valid state."""

    def __init__(self, message, state=None, trajectory=None):
        super().__init__(message)
        self.state = state
        self.trajectory = trajectory


class NoHorizonError(ValueError):
    """The Bihari integral does not converge, so no finite horizon exists."""


@dataclass(frozen=True)
class SolverConfig:
    d: int = 2
    N: int = 16
    nu: float = 0.0
    dt: float = 1e-3
    T: float = 1.0
    dealias: bool = True
    seed: int = 0
    blowup_factor: float = 1e6
    blowup_threshold: float | None = None
    store_every: int = 1

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"d must be 2 or 3, got {self.d}")
        if self.nu < 0:
            raise ValueError("viscosity must be non-negative")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.store_every < 1:
            raise ValueError("store_every must be >= 1")

    @property
    def torus(self) -> Torus:
        return sp.torus(self.d, self.N, self.dealias)


@dataclass(frozen=True)
class GalerkinState:
    t: float
    xi: SpectralField
    u_bar: np.ndarray

    @property
    def torus(self) -> Torus:
        return self.xi.torus


@dataclass
class Trajectory:
    """Stored samples of a run.

    ``fields`` holds vorticity coefficients (``kind == "vorticity"``) or
    velocity coefficients (``kind == "velocity"``), shape ``(n, c, *spec)``.
    ``dissipation[i]`` is ``2 nu int_0^{t_i} |grad xi|_0^2 dr`` accumulated
    with the stepper's own quadrature.
    """

    torus: Torus
    kind: str
    times: np.ndarray
    fields: np.ndarray
    u_bar: np.ndarray
    dissipation: np.ndarray
    nu: float = 0.0
    blowup: bool = False
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return self.times.size

    def vorticity(self, i: int) -> SpectralField:
        f = SpectralField(self.torus, self.fields[i])
        return f if self.kind == "vorticity" else sp.curl(f)

    def velocity(self, i: int) -> SpectralField:
        if self.kind == "velocity":
            return SpectralField(self.torus, self.fields[i])
        return reconstruct_velocity(self.state(i))

    def state(self, i: int) -> GalerkinState:
        return GalerkinState(float(self.times[i]), self.vorticity(i), np.array(self.u_bar[i]))

    def index(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol:
            raise ValueError(f"time {t} is not a stored sample")
        return i

    def write_csv(self, filename) -> None:
        """Columns ``t,enstrophy,palinstrophy,h1_velocity,mean_1..mean_d,blowup_flag``."""
        d = self.torus.d
        dg = self.diagnostics
        with Path(filename).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "enstrophy", "palinstrophy", "h1_velocity"]
                            + [f"mean_{m + 1}" for m in range(d)] + ["blowup_flag"])
            last = len(self) - 1
            for i in range(len(self)):
                flag = int(self.blowup and i == last)
                writer.writerow([f"{self.times[i]:.17g}", f"{dg['enstrophy'][i]:.17g}",
                                 f"{dg['palinstrophy'][i]:.17g}", f"{dg['h1_velocity'][i]:.17g}"]
                                + [f"{x:.17g}" for x in self.u_bar[i]] + [flag])


class _System:
    """Right-hand side split into a diagonal part and the rest."""

    def __init__(self, T: Torus, fam: VectorFieldFamily, nu: float):
        self.T, self.fam, self.nu = T, fam, nu
        # i (sigma_bar_k . k) for the spatially constant part of each sigma_k
        self.shift = np.stack([1j * sum(m * kk for m, kk in zip(fam.mean[k], T.k))
                               * np.ones(T.shape) for k in range(fam.K)]) \
            if fam.K else np.zeros((0,) + T.shape, dtype=complex)
        self._zero = (0,) * T.d

    def diag(self, zdot: np.ndarray) -> np.ndarray:
        lam = -self.nu * self.T.ksq + 0j
        for k in range(self.fam.K):
            if zdot[k] != 0 and np.any(self.fam.mean[k] != 0):
                lam = lam + zdot[k] * self.shift[k]
        return lam

    def drift_velocity(self, zdot: np.ndarray) -> np.ndarray | float:
        """Grid field ``- sum_k zdot_k (sigma_k - mean sigma_k)``."""
        fam = self.fam
        if fam.K == 0 or not np.any(zdot):
            return 0.0
        return -np.tensordot(zdot, fam.fluct_grid, axes=1)


class _VorticitySystem(_System):
    def nonlinear(self, xi: np.ndarray, ubar: np.ndarray, zdot: np.ndarray):
        T, fam = self.T, self.fam
        v = _biot_savart_coef(T, xi)
        w = T.to_grid(v) + ubar.reshape((T.d,) + (1,) * T.d) + self.drift_velocity(zdot)
        if T.d == 2:
            dxi = T.to_grid(T.grad(xi[0]))
            out = -T.from_grid(np.sum(w * dxi, axis=0))[None]
        else:
            xg = T.to_grid(xi)
            cross = np.stack([w[1] * xg[2] - w[2] * xg[1],
                              w[2] * xg[0] - w[0] * xg[2],
                              w[0] * xg[1] - w[1] * xg[0]])
            out = _curl_coef(T, T.from_grid(cross))
        out[(slice(None),) + self._zero] = 0.0
        dubar = zdot @ fam.mean_density(v) if fam.K else np.zeros(T.d)
        return out, dubar

    def dissipation(self, xi: np.ndarray) -> float:
        T = self.T
        return 2.0 * self.nu * T.volume * float(np.sum(T.weight * T.ksq * np.abs(xi) ** 2))

    def post(self, xi: np.ndarray) -> np.ndarray:
        xi = xi.copy()
        xi[(slice(None),) + self._zero] = 0.0
        if self.T.d == 3:
            xi = _leray_coef(self.T, xi)
        return xi


class _VelocitySystem(_System):
    def nonlinear(self, u: np.ndarray, ubar, zdot: np.ndarray):
        T, fam = self.T, self.fam
        ug = T.to_grid(u)
        du = T.to_grid(T.grad(u))                                  # (c, i, grid)
        w = ug + self.drift_velocity(zdot)
        out = -np.einsum("i...,ci...->c...", w, du)
        for k in range(fam.K):
            if zdot[k] != 0:
                out += zdot[k] * np.einsum("j...,cj...->c...", ug, fam.dgrid[k])
        return _leray_coef(T, T.from_grid(out)), ubar

    def dissipation(self, u: np.ndarray) -> float:
        return 0.0

    def post(self, u: np.ndarray) -> np.ndarray:
        return _leray_coef(self.T, u)


def _biot_savart_coef(T: Torus, xi: np.ndarray) -> np.ndarray:
    ik = [1j * kk for kk in T.k]
    if T.d == 2:
        psi = xi[0] * T.inv_ksq
        return np.stack([ik[1] * psi, -ik[0] * psi])
    psi = xi * T.inv_ksq
    return np.stack([ik[1] * psi[2] - ik[2] * psi[1],
                     ik[2] * psi[0] - ik[0] * psi[2],
                     ik[0] * psi[1] - ik[1] * psi[0]])


def _curl_coef(T: Torus, u: np.ndarray) -> np.ndarray:
    return sp.curl(SpectralField(T, u)).coef


def _leray_coef(T: Torus, u: np.ndarray) -> np.ndarray:
    return sp.leray_project(SpectralField(T, u)).coef


def _lawson_rk4(system: _System, y: np.ndarray, b: np.ndarray, zdot: np.ndarray, h: float,
                factors=None):
    """One integrating-factor RK4 step; returns ``(y, b, dissipation increment)``."""
    if factors is None:
        lam = system.diag(zdot)
        factors = (np.exp(0.5 * h * lam), np.exp(h * lam))
    Eh, E = factors
    k1, m1 = system.nonlinear(y, b, zdot)
    y2 = Eh * (y + 0.5 * h * k1)
    b2 = b + 0.5 * h * m1
    k2, m2 = system.nonlinear(y2, b2, zdot)
    y3 = Eh * y + 0.5 * h * k2
    b3 = b + 0.5 * h * m2
    k3, m3 = system.nonlinear(y3, b3, zdot)
    y4 = E * y + h * Eh * k3
    b4 = b + h * m3
    k4, m4 = system.nonlinear(y4, b4, zdot)
    y_new = E * y + (h / 6.0) * (E * k1 + 2.0 * Eh * (k2 + k3) + k4)
    b_new = b + (h / 6.0) * (m1 + 2.0 * (m2 + m3) + m4)
    diss = (h / 6.0) * (system.dissipation(y) + 2.0 * system.dissipation(y2)
                        + 2.0 * system.dissipation(y3) + system.dissipation(y4))
    return system.post(y_new), b_new, diss


def _empty_family(T: Torus) -> VectorFieldFamily:
    return VectorFieldFamily(T, [])


def _check_family(cfg: SolverConfig, fam: VectorFieldFamily | None) -> VectorFieldFamily:
    T = cfg.torus
    if fam is None:
        return _empty_family(T)
    if fam.torus != T:
        raise ValueError(f"family lives on {fam.torus}, solver uses {T}")
    return fam


def _check_vorticity(T: Torus, xi: SpectralField) -> None:
    if xi.torus != T:
        raise ValueError(f"vorticity lives on {xi.torus}, solver uses {T}")
    if xi.components != (1 if T.d == 2 else 3):
        raise ValueError(f"vorticity in d={T.d} needs {1 if T.d == 2 else 3} component(s)")


def rhs_vorticity(state: GalerkinState, fam: VectorFieldFamily, zdot, cfg: SolverConfig) -> SpectralField:
    """``nu Lap xi - L_u xi + sum_k L_{sigma_k} xi zdot_k`` truncated to the band."""
    T = cfg.torus
    fam = _check_family(cfg, fam)
    _check_vorticity(T, state.xi)
    zdot = np.atleast_1d(np.asarray(zdot, dtype=float)) if fam.K else np.zeros(0)
    if zdot.shape != (fam.K,):
        raise ValueError(f"zdot needs K={fam.K} entries")
    system = _VorticitySystem(T, fam, cfg.nu)
    rest, _ = system.nonlinear(state.xi.coef, np.asarray(state.u_bar, float), zdot)
    return state.xi.with_coef(system.diag(zdot) * state.xi.coef + rest)


def rhs_mean(state: GalerkinState, fam: VectorFieldFamily, zdot) -> np.ndarray:
    """``d ubar^m / dt = sum_k avg(v^l d_m sigma_k^l) zdot_k`` with ``v = K xi``."""
    if fam.K == 0:
        return np.zeros(state.torus.d)
    zdot = np.atleast_1d(np.asarray(zdot, dtype=float))
    if zdot.shape != (fam.K,):
        raise ValueError(f"zdot needs K={fam.K} entries")
    v = _biot_savart_coef(state.torus, state.xi.coef)
    return zdot @ fam.mean_density(v)


def reconstruct_velocity(state: GalerkinState) -> SpectralField:
    """``u = K xi + ubar``."""
    T = state.torus
    u = _biot_savart_coef(T, state.xi.coef)
    u[(slice(None),) + (0,) * T.d] = np.asarray(state.u_bar, dtype=float)
    return SpectralField(T, u)


def _threshold(cfg: SolverConfig, xi0_norm: float) -> float:
    if cfg.blowup_threshold is not None:
        return cfg.blowup_threshold
    return cfg.blowup_factor * xi0_norm if xi0_norm > 0 else math.inf


def step(state: GalerkinState, cfg: SolverConfig, fam: VectorFieldFamily | None, zdot,
         h: float | None = None, threshold: float | None = None) -> GalerkinState:
    """Advance one step of size ``h`` (default ``cfg.dt``) with constant ``zdot``."""
    T = cfg.torus
    fam = _check_family(cfg, fam)
    _check_vorticity(T, state.xi)
    h = cfg.dt if h is None else h
    zdot = np.atleast_1d(np.asarray(zdot, dtype=float)) if fam.K else np.zeros(0)
    system = _VorticitySystem(T, fam, cfg.nu)
    xi, ub, _ = _lawson_rk4(system, state.xi.coef, np.asarray(state.u_bar, float), zdot, h)
    limit = _threshold(cfg, sp.sobolev_norm(state.xi, 0)) if threshold is None else threshold
    new = GalerkinState(state.t + h, SpectralField(T, xi), ub)
    norm = math.sqrt(T.norm2(xi))
    if not np.isfinite(norm) or norm > limit:
        raise HorizonReached(f"|xi|_0 = {norm:.3e} exceeded {limit:.3e} at t={new.t:.6g}",
                             state=state)
    return new


def _segments(noise: SamplePath | None, K: int, T_end: float, dt: float):
    """Yield ``(h, n_sub, zdot)`` for consecutive noise segments covering ``[0, T_end]``."""
    if T_end == 0:
        return
    if noise is None or K == 0:
        if noise is not None and noise.dim != K:
            raise ValueError(f"noise has K={noise.dim} components, family has K={K}")
        n = max(1, int(math.ceil(T_end / dt - 1e-9)))
        yield T_end / n, n, np.zeros(K)
        return
    if noise.dim != K:
        raise ValueError(f"noise has K={noise.dim} components, family has K={K}")
    t0, t1 = noise.horizon
    if t0 > 1e-12 or t1 < T_end - 1e-12:
        raise ValueError(f"noise horizon [{t0}, {t1}] does not cover [0, {T_end}]")
    times = noise.times
    slopes = noise.slopes()
    inner = times[(times > 1e-12) & (times < T_end - 1e-12)]
    breaks = np.concatenate([[0.0], inner, [T_end]])
    for a, b in zip(breaks[:-1], breaks[1:]):
        seg = min(int(np.searchsorted(times, 0.5 * (a + b), side="right")) - 1, slopes.shape[0] - 1)
        n = max(1, int(math.ceil((b - a) / dt - 1e-9)))
        yield (b - a) / n, n, slopes[seg]


def _run(system: _System, y0: np.ndarray, b0: np.ndarray, cfg: SolverConfig, K: int,
         noise: SamplePath | None, kind: str, threshold: float) -> Trajectory:
    T = system.T
    times, fields, bars, diss = [0.0], [y0], [b0], [0.0]
    y, b, t, D = y0, b0, 0.0, 0.0
    count = 0
    blowup = None
    for h, n, zdot in _segments(noise, K, cfg.T, cfg.dt):
        lam = system.diag(zdot)
        factors = (np.exp(0.5 * h * lam), np.exp(h * lam))
        for _ in range(n):
            y_new, b_new, dD = _lawson_rk4(system, y, b, zdot, h, factors)
            norm = math.sqrt(T.norm2(y_new)) if kind == "vorticity" else \
                math.sqrt(T.norm2(_curl_coef(T, y_new)))
            if not np.isfinite(norm) or norm > threshold:
                blowup = (t + h, norm)
                break
            y, b, t, D = y_new, b_new, t + h, D + dD
            count += 1
            if count % cfg.store_every == 0:
                times.append(t)
                fields.append(y)
                bars.append(b)
                diss.append(D)
        if blowup:
            break
    if not blowup and times[-1] != t:
        times.append(t)
        fields.append(y)
        bars.append(b)
        diss.append(D)
    traj = Trajectory(T, kind, np.asarray(times), np.asarray(fields), np.asarray(bars),
                      np.asarray(diss), nu=system.nu, blowup=bool(blowup))
    traj.diagnostics = trajectory_diagnostics(traj)
    if blowup:
        raise HorizonReached(f"|xi|_0 = {blowup[1]:.3e} exceeded {threshold:.3e} "
                             f"at t={blowup[0]:.6g}", state=traj.state(len(traj) - 1),
                             trajectory=traj)
    return traj


def solve(xi0: SpectralField, ubar0, cfg: SolverConfig, fam: VectorFieldFamily | None = None,
          noise: SamplePath | None = None) -> Trajectory:
    """Integrate the vorticity + mean system on ``[0, cfg.T]``.

    A vorticity with nonzero mean (or, in 3D, nonzero divergence) is
    projected with a warning.  Raises :class:`HorizonReached` carrying the
    partial trajectory if ``|xi|_0`` exceeds the blow-up threshold.
    """
    T = cfg.torus
    fam = _check_family(cfg, fam)
    _check_vorticity(T, xi0)
    coef = xi0.coef.copy()
    scale = max(1.0, float(np.max(np.abs(coef))))
    if np.any(np.abs(xi0.mean()) > 1e-12 * scale):
        warnings.warn("initial vorticity has a nonzero mean; projecting it out", stacklevel=2)
    if T.d == 3 and xi0.divergence_defect() > 1e-12:
        warnings.warn("initial vorticity is not divergence-free; projecting", stacklevel=2)
    system = _VorticitySystem(T, fam, cfg.nu)
    coef = system.post(coef)
    ubar0 = np.asarray(ubar0, dtype=float).reshape(T.d)
    threshold = _threshold(cfg, math.sqrt(T.norm2(coef)))
    return _run(system, coef, ubar0, cfg, fam.K, noise, "vorticity", threshold)


def solve_velocity(u0: SpectralField, cfg: SolverConfig, fam: VectorFieldFamily | None = None,
                   noise: SamplePath | None = None) -> Trajectory:
    """Velocity-form Galerkin system ``du = [nu Lap u - P(u.grad)u] dt + P L~_sigma u dz``."""
    T = cfg.torus
    fam = _check_family(cfg, fam)
    if u0.torus != T or u0.components != T.d:
        raise ValueError("initial velocity must be a vector field on the solver torus")
    system = _VelocitySystem(T, fam, cfg.nu)
    coef = system.post(u0.coef.copy())
    threshold = _threshold(cfg, math.sqrt(T.norm2(_curl_coef(T, coef))))
    traj = _run(system, coef, np.zeros(0), cfg, fam.K, noise, "velocity", threshold)
    traj.u_bar = traj.fields[(slice(None), slice(None)) + (0,) * T.d].real.copy()
    traj.diagnostics = trajectory_diagnostics(traj)
    return traj


def trajectory_diagnostics(traj: Trajectory) -> dict:
    T = traj.torus
    n = len(traj)
    ens, pal, h1 = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        xi = traj.vorticity(i).coef
        ens[i] = T.norm2(xi)
        pal[i] = T.volume * float(np.sum(T.weight * T.ksq * np.abs(xi) ** 2))
        if traj.kind == "velocity":
            u = traj.fields[i]
        else:
            u = _biot_savart_coef(T, xi)
            u[(slice(None),) + (0,) * T.d] = traj.u_bar[i]
        h1[i] = math.sqrt(T.norm2(u, 1))
    return {"enstrophy": ens, "palinstrophy": pal, "h1_velocity": h1}


# -- initial data -------------------------------------------------------------
def taylor_green(T: Torus, amplitude: float = 1.0) -> SpectralField:
    """2D Taylor-Green vorticity ``2 a cos x1 cos x2``."""
    if T.d != 2:
        raise ValueError("Taylor-Green preset is two-dimensional")
    return sp.from_function(T, lambda x, y: 2.0 * amplitude * np.cos(x) * np.cos(y))


def random_vorticity(T: Torus, norm: float = 1.0, seed=0, band: int = 4,
                     decay: float = 2.0) -> SpectralField:
    """Random band-limited mean-free (3D: divergence-free) vorticity with ``|xi|_0 = norm``."""
    comps = 1 if T.d == 2 else 3
    xi = sp.random_field(T, comps, seed=seed, band=band, decay=decay)
    coef = xi.coef.copy()
    coef[(slice(None),) + (0,) * T.d] = 0.0
    if T.d == 3:
        coef = _leray_coef(T, coef)
    scale = math.sqrt(T.norm2(coef))
    return SpectralField(T, coef * (norm / scale))


# -- 3D horizon estimate ----------------------------------------------------
@dataclass(frozen=True)
class BihariConstants:
    """Calibration constants for the horizon estimate (user supplied)."""

    C: float = 1.0
    C3: float = 1.0
    C_eps: float = 1.0
    p: float = 2.5
    L: float = 1.0
    kappa: float = 1.0
    q: float | None = None
    w: Callable[[float], float] | None = None


def bihari_w(y, ubar0_norm: float, c: BihariConstants):
    """``(1+|ubar0|) exp(C (1+y)^p) y^8 + y^10 + (1 + C3 C_eps) y^6 + y^2``."""
    if c.w is not None:
        return c.w(y)
    with np.errstate(over="ignore"):
        return ((1.0 + ubar0_norm) * np.exp(c.C * (1.0 + y) ** c.p) * y ** 8
                + y ** 10 + (1.0 + c.C3 * c.C_eps) * y ** 6 + y ** 2)


def gronwall_q(omega_horizon: float, L: float, kappa: float) -> float:
    """``q = 2 exp(omega(0,T) / (L alpha))`` with ``alpha = 1 v L^{-1} (2 e^2)^{-kappa}``."""
    alpha = max(1.0, (2.0 * math.e ** 2) ** (-kappa) / L)
    return 2.0 * math.exp(omega_horizon / (L * alpha))


def tstar_estimate(xi0_norm: float, ubar0, omega_Z_horizon: float,
                   constants: BihariConstants = BihariConstants()) -> float:
    """Largest ``T*`` with ``W(q G0) + T* C q`` in the range of ``W``.

    ``G0 = |xi0|_0^2`` and ``W(y) = int^y dz / w(z)``; the answer is
    ``int_{q G0}^inf dz / w(z) / (C q)``.
    """
    if xi0_norm < 0 or omega_Z_horizon < 0:
        raise ValueError("inputs must be non-negative")
    c = constants
    ub = float(np.linalg.norm(np.atleast_1d(ubar0)))
    q = c.q if c.q is not None else gronwall_q(omega_Z_horizon, c.L, c.kappa)
    start = q * xi0_norm ** 2
    if start <= 0:
        return math.inf

    def inv_w(y):
        w = bihari_w(y, ub, c)
        return 0.0 if not np.isfinite(w) else 1.0 / w

    total = 0.0
    a = start
    # integrate over geometrically growing panels to catch slow tails
    for _ in range(200):
        b = a * 4.0
        piece, _err = integrate.quad(inv_w, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += piece
        if piece <= 1e-15 * total:
            break
        a = b
    else:
        raise NoHorizonError("int dz / w(z) diverges; no finite blow-up horizon")
    return total / (c.C * q)
