"""Acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS/FAIL line; the lines are collected in the
``acceptance criteria`` section of the pytest terminal summary.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest
from scipy import integrate
from scipy.integrate import solve_ivp

from roughns import analysis as an
from roughns import drivers as dr
from roughns import roughpath as rp
from roughns import solver as so
from roughns import spectral as sp


def _lifts():
    return {
        "brownian": rp.lift_piecewise_linear(rp.sample_brownian(1, 2.0 ** -10, 3, 1.0)),
        "fbm": rp.lift_piecewise_linear(rp.sample_fbm(2, 2.0 ** -8, 2, 1.0, 0.7)),
        "smooth": rp.lift_piecewise_linear(rp.smooth_path(
            lambda t: np.array([np.sin(2 * t), t * t, np.cos(5 * t)]), 2.0 ** -8, 1.0)),
        "linear": rp.lift_piecewise_linear(rp.linear_path([1.0, -2.0, 0.5], T=1.0)),
    }


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_c01_chen(report):
    lifts = _lifts()
    rng = np.random.default_rng(0)
    start = time.perf_counter()
    worst = 0.0
    for name in ("brownian", "smooth"):
        lift = lifts[name]
        for s, th, t in np.sort(rng.uniform(0, 1, (1000, 3)), axis=1):
            worst = max(worst, float(np.linalg.norm(rp.chen_defect(lift, s, th, t))))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5.0
    report(1, "Chen", ok, f"max defect {worst:.2e}, {elapsed:.2f} s")
    assert ok


def test_c02_shuffle(report):
    rng = np.random.default_rng(1)
    worst = 0.0
    for lift in _lifts().values():
        for s, t in np.sort(rng.uniform(0, 1, (500, 2)), axis=1):
            Z, ZZ = lift.Z(s, t), lift.ZZ(s, t)
            worst = max(worst, float(np.max(np.abs(0.5 * (ZZ + ZZ.T) - 0.5 * np.outer(Z, Z)))))
    ok = worst <= 1e-12
    report(2, "shuffle", ok, f"max |Sym(ZZ) - Z(x)Z/2| {worst:.2e}")
    assert ok


def test_c03_biot_savart(report):
    worst = {"curl_K": 0.0, "K_curl": 0.0, "grad_norm": 0.0}
    for T in (sp.torus(2, 12), sp.torus(3, 6)):
        comps = 1 if T.d == 2 else 3
        zero = (slice(None),) + (0,) * T.d
        for seed in range(100):
            xi = sp.random_field(T, comps, seed=seed)
            coef = xi.coef.copy()
            coef[zero] = 0
            xi = xi.with_coef(coef)
            if T.d == 3:
                xi = sp.leray_project(xi)
            v = sp.biot_savart(xi)
            scale = max(1.0, float(np.max(np.abs(xi.coef))))
            worst["curl_K"] = max(worst["curl_K"], float(np.max(np.abs(sp.curl(v).coef - xi.coef))) / scale)
            u = sp.leray_project(sp.random_field(T, T.d, seed=1000 + seed))
            ucoef = u.coef.copy()
            ucoef[zero] = 0
            u = u.with_coef(ucoef)
            back = sp.biot_savart(sp.curl(u))
            worst["K_curl"] = max(worst["K_curl"], float(np.max(np.abs(back.coef - u.coef)))
                                  / max(1.0, float(np.max(np.abs(u.coef)))))
            for m in (0, 1):
                g = math.sqrt(sum(sp.sobolev_norm(sp.gradient(sp.SpectralField(T, v.coef[c])), m) ** 2
                                  for c in range(T.d)))
                f = sp.sobolev_norm(xi, m)
                worst["grad_norm"] = max(worst["grad_norm"], abs(g - f) / f)
    ok = all(w <= 1e-12 for w in worst.values())
    report(3, "Biot-Savart", ok, ", ".join(f"{k} {w:.1e}" for k, w in worst.items()))
    assert ok


def test_c04_trilinear(report):
    worst = 0.0
    for T in (sp.torus(2, 12), sp.torus(3, 6)):
        for seed in range(100):
            band = T.N // 2
            u = sp.leray_project(sp.random_field(T, T.d, seed=seed, band=band))
            v = sp.random_field(T, T.d, seed=500 + seed, band=band)
            w = sp.random_field(T, T.d, seed=900 + seed, band=band)
            scale = sp.sobolev_norm(u, 1) * sp.sobolev_norm(v, 1) * sp.sobolev_norm(w, 1)
            worst = max(worst, abs(sp.trilinear(u, v, v)) / scale,
                        abs(sp.trilinear(u, v, w) + sp.trilinear(u, w, v)) / scale)
    ok = worst <= 1e-12
    report(4, "trilinear", ok, f"max relative defect {worst:.2e}")
    assert ok


def test_c05_taylor_green(report):
    cfg = so.SolverConfig(d=2, N=16, nu=0.01, dt=1e-3, T=1.0)
    start = time.perf_counter()
    traj = so.solve(so.taylor_green(cfg.torus), [0.0, 0.0], cfg)
    elapsed = time.perf_counter() - start
    ens = traj.diagnostics["enstrophy"]
    err = float(np.max(np.abs(ens / (ens[0] * np.exp(-4 * cfg.nu * traj.times)) - 1)))
    ok = err <= 1e-8 and elapsed < 10 and traj.times[-1] == pytest.approx(1.0)
    report(5, "Taylor-Green", ok, f"relative enstrophy error {err:.2e}, {elapsed:.2f} s")
    assert ok


def test_c06_enstrophy_balance(report):
    start = time.perf_counter()
    details, ok = [], True
    for nu in (0.0, 0.01):
        T = sp.torus(2, 32)
        fam = dr.random_family(T, 2, seed=1, band=2, amplitude=0.25)
        bm = rp.sample_brownian(7, 2.0 ** -10, 2, 0.5)
        xi0 = so.random_vorticity(T, 1.0, seed=3, band=4)
        res = []
        for j in (10, 11, 12):
            cfg = so.SolverConfig(d=2, N=32, nu=nu, dt=2.0 ** -j, T=0.5)
            res.append(an.enstrophy_balance_residual(so.solve(xi0, [0.0, 0.0], cfg, fam, bm)))
        ratios = [res[0] / res[1], res[1] / res[2]]
        ok &= max(res) <= 1e-6 and all(12 <= r <= 20 for r in ratios)
        details.append(f"nu={nu}: residuals {', '.join(f'{r:.1e}' for r in res)}, "
                       f"ratios {ratios[0]:.1f} {ratios[1]:.1f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 120
    report(6, "enstrophy balance", ok, "; ".join(details) + f"; {elapsed:.0f} s")
    assert ok


def test_c07_moving_frame(report):
    cfg = so.SolverConfig(d=2, N=32, nu=0.01, dt=1e-3, T=0.5)
    T = cfg.torus
    fam = dr.VectorFieldFamily(T, [sp.constant(T, [1.0, 0.0]), sp.constant(T, [0.3, 0.7])])
    bm = rp.sample_brownian(5, 2e-3, 2, cfg.T)
    start = time.perf_counter()
    out = an.moving_frame_error(so.random_vorticity(T, 5.0, seed=2), [0.0, 0.0], cfg, fam, bm)
    elapsed = time.perf_counter() - start
    ok = out["relative_error"] <= 1e-6 and elapsed < 120
    report(7, "moving frame", ok, f"C_T H^0 relative error {out['relative_error']:.2e} over "
           f"{out['compared_samples']} samples, {elapsed:.1f} s")
    assert ok


def test_c08_wong_zakai(report):
    cfg = so.SolverConfig(d=2, N=32, nu=0.01, dt=2.0 ** -11, T=0.5)
    fam = dr.random_family(cfg.torus, 2, seed=1, band=2, amplitude=0.5)
    xi0 = so.random_vorticity(cfg.torus, 2.0, seed=3, band=4)
    start = time.perf_counter()
    table = an.wong_zakai_study(11, [2.0 ** -j for j in range(4, 10)], cfg, fam, xi0, [0.0, 0.0],
                                reference=2.0 ** -10)
    elapsed = time.perf_counter() - start
    ok = table.monotone and table.final_ratio <= 1 / 3 and elapsed < 600
    errs = ", ".join(f"{e:.2e}" for e in table.sup_h0)
    report(8, "Wong-Zakai", ok, f"C_T H^0 errors {errs} (nonincreasing up to 10% per level: "
           f"{table.monotone}); final/initial {table.final_ratio:.3f}; "
           f"{elapsed:.0f} s")
    assert ok


def _remainder(N, fam_kw, noise, xi_norm, nu, dt, sizes):
    cfg = so.SolverConfig(d=2, N=N, nu=nu, dt=dt, T=0.5)
    fam = dr.random_family(cfg.torus, 2, **fam_kw)
    traj = so.solve(so.random_vorticity(cfg.torus, xi_norm, seed=3, band=4), [0.0, 0.0], cfg, fam, noise)
    return an.remainder_scaling(traj, fam, rp.lift_piecewise_linear(noise), sizes, max_intervals=64)


def test_c09_remainder_scaling(report):
    start = time.perf_counter()
    smooth = rp.smooth_path(lambda t: np.array([np.sin(3 * t), np.sin(2 * t)]), 2.0 ** -12, 0.5)
    s_sizes = [2.0 ** -j for j in range(3, 9)]
    s_kw = dict(seed=1, band=2, amplitude=0.5, mean_free=False)
    s16 = _remainder(16, s_kw, smooth, 1e-4, 0.0, 2.0 ** -12, s_sizes)
    s32 = _remainder(32, s_kw, smooth, 1e-4, 0.0, 2.0 ** -12, s_sizes)
    bm = rp.sample_brownian(21, 2.0 ** -12, 2, 0.5)
    b_sizes = [2.0 ** -j for j in range(3, 11)]
    b_kw = dict(seed=1, band=2, amplitude=0.5)
    b16 = _remainder(16, b_kw, bm, 1.0, 0.01, 2.0 ** -13, b_sizes)
    b32 = _remainder(32, b_kw, bm, 1.0, 0.01, 2.0 ** -13, b_sizes)
    gate = max(float(np.max(np.abs(b.mean_norms - a.mean_norms) / a.mean_norms))
               for a, b in ((s16, s32), (b16, b32)))
    elapsed = time.perf_counter() - start
    p = 2.5
    ok = (s16.slope >= 2.8 and b16.slope >= 3 / p - 0.15 and int(b16.counts.max()) >= 64
          and gate < 0.05 and elapsed < 600)
    report(9, "remainder scaling", ok,
           f"smooth slope {s16.slope:.3f} (>= 2.8), Brownian slope {b16.slope:.3f} "
           f"(>= {3 / p - 0.15:.2f}) over {int(b16.counts.sum())} intervals, "
           f"N vs 2N change {gate:.1e}; {elapsed:.0f} s")
    assert ok


def test_c10_pressure(report):
    cfg = so.SolverConfig(d=2, N=16, nu=0.01, dt=2.0 ** -10, T=0.25)
    T = cfg.torus
    fam = dr.random_family(T, 2, seed=1, band=2, amplitude=0.5)
    bm = rp.sample_brownian(5, 2.0 ** -8, 2, cfg.T)
    lift = rp.lift_piecewise_linear(bm)
    xi0 = so.random_vorticity(T, 2.0, seed=3, band=4)
    traj = so.solve(xi0, [0.1, 0.0], cfg, fam, bm)
    res = an.pressure_recovery(traj, fam, lift)

    u = [traj.velocity(i).coef for i in range(len(traj))]
    index = {float(t): i for i, t in enumerate(traj.times)}

    def germ(a, b):
        inc = lift.increment(a, b)
        ua = u[index[float(a)]]
        return fam.A1_coef(inc, ua, "velocity-Q") + fam.A2_coef(inc, ua, "velocity-Q")

    half = (len(traj) - 1) // 2
    whole = an.sewing_integrate(germ, traj.times).value
    parts = (an.sewing_integrate(germ, traj.times[:half + 1]).value
             + an.sewing_integrate(germ, traj.times[half:]).value)
    additivity = float(np.max(np.abs(whole - parts)) / np.max(np.abs(whole)))

    plain = so.solve(xi0, [0.1, 0.0], cfg)
    res0 = an.pressure_recovery(plain, dr.VectorFieldFamily(T, []), None)
    drift = np.stack([an.pressure_drift(T, plain.velocity(i).coef) for i in range(len(plain))])
    # independent quadrature: a fresh composite Simpson call on each prefix
    direct = np.zeros_like(drift)
    direct[1] = 0.5 * (plain.times[1] - plain.times[0]) * (drift[0] + drift[1])
    for i in range(2, len(plain)):
        direct[i] = (integrate.simpson(drift[: i + 1].real, x=plain.times[: i + 1], axis=0)
                     + 1j * integrate.simpson(drift[: i + 1].imag, x=plain.times[: i + 1], axis=0))
    scale = np.max(np.abs(direct))
    direct_err = float(np.max(np.abs(res0.pi - direct)) / scale)
    # even panel counts have a unique composite Simpson rule, so agreement there is to rounding
    even_err = float(np.max(np.abs(res0.pi[::2] - direct[::2])) / scale)

    ok = res.sector_defect <= 1e-10 and additivity <= 1e-10 and direct_err <= 1e-10
    report(10, "pressure", ok, f"P pi defect {res.sector_defect:.1e}, sewing additivity "
           f"{additivity:.1e}, sigma=0 vs direct quadrature {direct_err:.1e} "
           f"({even_err:.1e} at even panel counts)")
    assert ok


def test_c11_contraction(report):
    cfg = so.SolverConfig(d=2, N=16, nu=0.01, dt=2.0 ** -9, T=0.25)
    fam = dr.random_family(cfg.torus, 2, seed=1, band=2, amplitude=0.5)
    bm = rp.sample_brownian(9, 2.0 ** -8, 2, cfg.T)
    rep = an.contraction_study(so.random_vorticity(cfg.torus, 2.0, seed=3, band=4), [0.0, 0.0],
                               cfg, fam, bm, (1e-2, 1e-3, 1e-4), seed=1)
    ok = rep.linear and math.isfinite(rep.gronwall_constant)
    sups = ", ".join(f"{s:.2e}" for s in rep.sup_distances)
    report(11, "contraction", ok, f"sup distances {sups}; linear within factor "
           f"{rep.linear_within:.3f}; fitted C = {rep.gronwall_constant:.3f}")
    assert ok


def test_c12_semiflow(report):
    mk = lambda T_end: so.SolverConfig(d=2, N=16, nu=0.01, dt=2.0 ** -9, T=T_end)
    fam = dr.random_family(mk(1).torus, 2, seed=1, band=2, amplitude=0.5)
    bm = rp.sample_brownian(13, 2.0 ** -8, 2, 0.5)
    xi0 = so.random_vorticity(mk(1).torus, 2.0, seed=6, band=4)
    full = so.solve(xi0, [0.2, -0.1], mk(0.5), fam, bm)
    first = so.solve(xi0, [0.2, -0.1], mk(0.25), fam, bm)
    mid = first.state(len(first) - 1)
    second = so.solve(mid.xi, mid.u_bar, mk(0.25), fam, bm.restrict(0.25, 0.5).shifted(0.25))
    a = second.velocity(len(second) - 1).coef
    b = full.velocity(len(full) - 1).coef
    err = math.sqrt(full.torus.norm2(a - b) / full.torus.norm2(b))
    ok = err <= 1e-10
    report(12, "semiflow", ok, f"restart discrepancy {err:.2e} (relative L^2)")
    assert ok


def test_c13_three_d(report):
    cfg = so.SolverConfig(d=3, N=8, nu=0.1, dt=1e-2, T=0.5)
    fam = dr.random_family(cfg.torus, 2, seed=1, band=2, amplitude=0.5)
    bm = rp.sample_brownian(2, 2.0 ** -6, 2, cfg.T)
    traj = so.solve(so.random_vorticity(cfg.torus, 0.1, seed=4, band=3), [0, 0, 0], cfg, fam, bm)
    completed = traj.times[-1] == pytest.approx(0.5) and not traj.blowup
    budget = an.stretching_budget(traj)["max_abs_relative"]

    c = so.BihariConstants(C=1.0, C3=1.0, C_eps=1.0, p=2.5, q=2.0)
    est = so.tstar_estimate(math.sqrt(0.1), 0.0, 0.0, c)

    def rhs(t, y):
        return [c.C * c.q * so.bihari_w(y[0], 0.0, c)]

    # beyond y = 2 the remaining time is below 2^-9 / (9 C q), far under 1%
    hit = lambda t, y: y[0] - 2.0
    hit.terminal = True
    sol = solve_ivp(rhs, (0.0, 100.0), [c.q * 0.1], method="DOP853", events=hit, rtol=1e-12, atol=1e-14)
    oracle = float(sol.t_events[0][0])
    gap = abs(est - oracle) / oracle
    ok = completed and gap <= 0.01
    report(13, "3D local solve", ok, f"completed to t={traj.times[-1]:.2f}, stretching budget "
           f"{budget:.2e}; T* {est:.6f} vs ODE {oracle:.6f} ({gap:.1e})")
    assert ok


def test_c14_dual_formulation(report):
    cfg = so.SolverConfig(d=2, N=16, nu=0.01, dt=2.0 ** -9, T=0.5)
    fam = dr.random_family(cfg.torus, 2, seed=1, band=2, amplitude=0.5)
    noise = rp.smooth_path(lambda t: np.array([np.sin(3 * t), 1 - np.cos(2 * t)]), 2.0 ** -7, cfg.T)
    xi0 = so.random_vorticity(cfg.torus, 2.0, seed=7, band=4)
    ubar0 = np.array([0.1, 0.3])
    vort = so.solve(xi0, ubar0, cfg, fam, noise)
    u0 = so.reconstruct_velocity(so.GalerkinState(0.0, xi0, ubar0))
    vel = so.solve_velocity(u0, cfg, fam, noise)
    err = max(_rel(vel.fields[i], vort.velocity(i).coef) for i in range(len(vort)))
    ok = err <= 1e-8
    report(14, "dual formulation", ok, f"max relative L^2 velocity gap {err:.2e}")
    assert ok
