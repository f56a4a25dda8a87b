"""Batch experiment runner.

Subcommands::

    roughns run <config.toml> [--output DIR]
    roughns run --preset NAME [--output DIR]
    roughns presets
    roughns validate <config.toml>

Exit status: 0 when every configured check passes, 1 on a failed check,
2 on a configuration error, 3 on an unexpected numerical failure.
``ROUGHNS_OUTPUT_ROOT`` overrides the output root directory (default ``runs``).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from . import analysis as an
from . import drivers as dr
from . import roughpath as rp
from . import spectral as sp
from . import solver as so
from ._svg import line_plot

SCHEMA_VERSION = 1
KINDS = ("solve", "enstrophy", "wongzakai", "stability", "remainder", "pressure", "tstar")

_NUM = (int, float)
SCHEMA = {
    "solver": {"d": int, "N": int, "nu": _NUM, "dt": _NUM, "T": _NUM, "dealias": bool,
               "seed": int, "blowup_threshold": _NUM, "blowup_factor": _NUM, "store_every": int},
    "family": {"kind": str, "K": int, "seed": int, "band": int, "amplitude": _NUM,
               "mean_free": bool, "vectors": list, "path": str},
    "noise": {"kind": str, "seed": int, "mesh": _NUM, "H": _NUM, "frequencies": list,
              "amplitudes": list, "direction": list},
    "initial": {"kind": str, "amplitude": _NUM, "norm": _NUM, "seed": int, "band": int,
                "u_bar": list, "path": str},
    "study": {"halvings": int, "meshes": list, "reference": _NUM, "scales": list,
              "epsilons": list, "sizes": list, "p": _NUM, "max_intervals": int, "gate": bool,
              "m": _NUM, "C": _NUM, "C3": _NUM, "C_eps": _NUM, "q": _NUM, "L": _NUM,
              "kappa": _NUM, "xi0_norm": _NUM, "solve": bool, "moving_frame": bool,
              "expect_blowup": bool},
    "checks": {"enstrophy_tol": _NUM, "moving_frame_tol": _NUM, "residual_tol": _NUM,
               "ratio_min": _NUM, "ratio_max": _NUM, "slack": _NUM, "final_ratio": _NUM,
               "min_slope": _NUM, "gate_tol": _NUM, "sector_tol": _NUM,
               "additivity_tol": _NUM, "direct_tol": _NUM},
}
TOP = {"schema_version": int, "kind": str, "output": str}
CHOICES = {
    ("family", "kind"): ("none", "random", "constant", "file"),
    ("noise", "kind"): ("none", "brownian", "fbm", "smooth", "linear"),
    ("initial", "kind"): ("taylor-green", "random", "zero", "file"),
}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# -- configuration --------------------------------------------------------------
def _locate(text: str | None, section: str | None, key: str) -> str:
    if not text:
        return ""
    current = None
    for n, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[([^\]]+)\]", line)
        if head:
            current = head.group(1).strip()
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return f"line {n}: "
    return ""


def validate_config(doc: dict, text: str | None = None) -> dict:
    """Check the schema and kind-specific requirements; returns a normalized copy."""
    doc = copy.deepcopy(doc)
    for key in doc:
        if key not in TOP and key not in SCHEMA:
            raise ConfigError(f"{_locate(text, None, key)}unknown key {key!r}")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"{_locate(text, None, 'schema_version')}schema_version must be "
                          f"{SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"{_locate(text, None, 'kind')}kind must be one of {KINDS}, got {kind!r}")
    if "output" in doc and not isinstance(doc["output"], str):
        raise ConfigError(f"{_locate(text, None, 'output')}output must be a string")
    for section, allowed in SCHEMA.items():
        body = doc.setdefault(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in allowed:
                raise ConfigError(f"{_locate(text, section, key)}unknown key {section}.{key}")
            want = allowed[key]
            ok = isinstance(value, want) and not (want is not bool and isinstance(value, bool))
            if want is _NUM and isinstance(value, bool):
                ok = False
            if not ok:
                raise ConfigError(f"{_locate(text, section, key)}{section}.{key} has the wrong type "
                                  f"({type(value).__name__})")
            if (section, key) in CHOICES and value not in CHOICES[(section, key)]:
                raise ConfigError(f"{_locate(text, section, key)}{section}.{key} must be one of "
                                  f"{CHOICES[(section, key)]}")
    s = doc["solver"]
    try:
        solver_config(doc)
    except ValueError as exc:
        raise ConfigError(f"[solver] {exc}") from None
    st = doc["study"]
    if kind == "wongzakai":
        meshes = st.get("meshes", [])
        if len(meshes) < 3:
            raise ConfigError(f"{_locate(text, 'study', 'meshes')}wongzakai needs at least 3 meshes")
        if doc["noise"].get("kind", "brownian") != "brownian":
            raise ConfigError("wongzakai needs brownian noise")
    if kind == "remainder" and len(st.get("sizes", [])) < 6:
        raise ConfigError(f"{_locate(text, 'study', 'sizes')}remainder needs at least 6 interval sizes")
    if kind == "stability" and not st.get("scales") and not st.get("epsilons"):
        raise ConfigError("stability needs study.scales or study.epsilons")
    if kind == "enstrophy" and s.get("d", 2) != 2:
        raise ConfigError(f"{_locate(text, 'solver', 'd')}enstrophy balance is two-dimensional")
    if doc["family"].get("kind") == "file" and "path" not in doc["family"]:
        raise ConfigError("family.kind = 'file' needs family.path")
    if doc["initial"].get("kind") == "file" and "path" not in doc["initial"]:
        raise ConfigError("initial.kind = 'file' needs initial.path")
    return doc


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    doc = validate_config(doc, text)
    base = path.parent
    for section in ("family", "initial"):
        if "path" in doc[section] and not os.path.isabs(doc[section]["path"]):
            doc[section]["path"] = str(base / doc[section]["path"])
    return doc


def config_hash(doc: dict) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def solver_config(doc: dict, **override) -> so.SolverConfig:
    s = dict(doc.get("solver", {}))
    s.update(override)
    return so.SolverConfig(**s)


def build_family(doc: dict, T: sp.Torus) -> dr.VectorFieldFamily:
    f = doc["family"]
    kind = f.get("kind", "none")
    if kind == "none":
        return dr.VectorFieldFamily(T, [])
    if kind == "random":
        return dr.random_family(T, f.get("K", 2), seed=f.get("seed", 0), band=f.get("band", 2),
                                amplitude=f.get("amplitude", 0.5), mean_free=f.get("mean_free", True))
    if kind == "constant":
        vecs = f.get("vectors", [[1.0] + [0.0] * (T.d - 1)])
        if any(len(v) != T.d for v in vecs):
            raise ConfigError(f"family.vectors entries need {T.d} components")
        return dr.VectorFieldFamily(T, [sp.constant(T, v) for v in vecs])
    return dr.load_family(f["path"], T=T)


def build_noise(doc: dict, K: int, horizon: float) -> rp.SamplePath | None:
    n = doc["noise"]
    kind = n.get("kind", "none")
    if kind == "none" or K == 0:
        return None
    mesh = n.get("mesh", 2.0 ** -8)
    if kind == "brownian":
        return rp.sample_brownian(n.get("seed", 0), mesh, K, horizon)
    if kind == "fbm":
        return rp.sample_fbm(n.get("seed", 0), mesh, K, horizon, n.get("H", 0.7))
    if kind == "linear":
        direction = n.get("direction", [1.0] * K)
        if len(direction) != K:
            raise ConfigError(f"noise.direction needs {K} entries")
        return rp.smooth_path(lambda t: np.outer(t, direction), mesh, horizon)
    freqs = n.get("frequencies", [1.0 + k for k in range(K)])
    amps = n.get("amplitudes", [1.0] * K)
    if len(freqs) != K or len(amps) != K:
        raise ConfigError(f"noise.frequencies and noise.amplitudes need {K} entries")
    return rp.smooth_path(lambda t: np.stack([a * np.sin(w * t) for a, w in zip(amps, freqs)], -1),
                          mesh, horizon)


def build_initial(doc: dict, T: sp.Torus):
    i = doc["initial"]
    kind = i.get("kind", "random")
    ubar = np.asarray(i.get("u_bar", [0.0] * T.d), dtype=float)
    if ubar.shape != (T.d,):
        raise ConfigError(f"initial.u_bar needs {T.d} entries")
    if kind == "taylor-green":
        xi = so.taylor_green(T, i.get("amplitude", 1.0))
    elif kind == "random":
        xi = so.random_vorticity(T, i.get("norm", 1.0), seed=i.get("seed", 0),
                                 band=i.get("band", 4))
    elif kind == "zero":
        xi = sp.zeros(T, 1 if T.d == 2 else 3)
    else:
        xi = sp.read_field(i["path"])
        if xi.torus != T:
            raise ConfigError(f"initial field lives on {xi.torus}, solver uses {T}")
    return xi, ubar


# -- experiment kinds -----------------------------------------------------------
class _Run:
    def __init__(self, doc: dict, outdir: Path):
        self.doc, self.out = doc, outdir
        self.metrics: dict = {}
        self.checks: dict = {}
        self.tol = doc["checks"]
        self.study = doc["study"]

    def check(self, name: str, value, threshold, passed: bool) -> None:
        self.checks[name] = {"value": _jsonable(value), "threshold": _jsonable(threshold),
                             "passed": bool(passed)}

    def setup(self, **override):
        cfg = solver_config(self.doc, **override)
        T = cfg.torus
        fam = build_family(self.doc, T)
        noise = build_noise(self.doc, fam.K, cfg.T)
        xi0, ubar0 = build_initial(self.doc, T)
        return cfg, fam, noise, xi0, ubar0

    def write_rows(self, name: str, header, rows) -> None:
        with (self.out / name).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([f"{x:.17g}" if isinstance(x, float) else x for x in r])


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    return x


def _trajectory_outputs(run: _Run, traj: so.Trajectory, stem: str = "trajectory") -> None:
    traj.write_csv(run.out / f"{stem}.csv")
    line_plot(run.out / f"{stem}.svg",
              {"|xi|_0^2": (traj.times, traj.diagnostics["enstrophy"]),
               "|u|_1": (traj.times, traj.diagnostics["h1_velocity"])},
              title="diagnostics", xlabel="t")


def run_solve(run: _Run) -> None:
    cfg, fam, noise, xi0, ubar0 = run.setup()
    expect_blowup = run.study.get("expect_blowup", False)
    try:
        traj = so.solve(xi0, ubar0, cfg, fam, noise)
    except so.HorizonReached as exc:
        if exc.trajectory is not None:
            _trajectory_outputs(run, exc.trajectory)
        run.metrics["blowup_time"] = float(exc.trajectory.times[-1]) if exc.trajectory else None
        if not expect_blowup:
            raise NumericalFailure(str(exc)) from None
        run.check("blowup_observed", True, True, True)
        return
    _trajectory_outputs(run, traj)
    ens = traj.diagnostics["enstrophy"]
    run.metrics.update(final_time=float(traj.times[-1]), samples=len(traj),
                       enstrophy_initial=float(ens[0]), enstrophy_final=float(ens[-1]),
                       mean_final=traj.u_bar[-1].tolist())
    if expect_blowup:
        run.check("blowup_observed", False, True, False)
    if cfg.d == 2:
        res = an.enstrophy_balance_residual(traj)
        tol = run.tol.get("enstrophy_tol", 1e-6)
        run.metrics["enstrophy_residual"] = res
        run.check("enstrophy_balance", res, tol, res <= tol)
    else:
        budget = an.stretching_budget(traj)
        run.metrics["stretching_budget_max_relative"] = budget["max_abs_relative"]
        run.metrics["divergence_defect_final"] = traj.vorticity(len(traj) - 1).divergence_defect()
        run.check("completed", True, True, True)
    if run.study.get("moving_frame", False):
        if noise is None:
            raise ConfigError("moving_frame check needs noise")
        mf = an.moving_frame_error(xi0, ubar0, cfg, fam, noise)
        tol = run.tol.get("moving_frame_tol", 1e-6)
        run.metrics["moving_frame"] = mf
        run.check("moving_frame", mf["relative_error"], tol, mf["relative_error"] <= tol)


def run_enstrophy(run: _Run) -> None:
    cfg, fam, noise, xi0, ubar0 = run.setup()
    traj = so.solve(xi0, ubar0, cfg, fam, noise)
    _trajectory_outputs(run, traj)
    res = an.enstrophy_balance_residual(traj)
    tol = run.tol.get("residual_tol", 1e-6)
    run.metrics["residual"] = res
    run.check("residual", res, tol, res <= tol)
    halvings = run.study.get("halvings", 0)
    if halvings:
        dts, residuals = [cfg.dt], [res]
        for h in range(1, halvings + 1):
            c = solver_config(run.doc, dt=cfg.dt / 2 ** h)
            residuals.append(an.enstrophy_balance_residual(so.solve(xi0, ubar0, c, fam, noise)))
            dts.append(c.dt)
        ratios = [a / b for a, b in zip(residuals[:-1], residuals[1:])]
        lo, hi = run.tol.get("ratio_min", 12.0), run.tol.get("ratio_max", 20.0)
        run.metrics.update(halving_dts=dts, halving_residuals=residuals, halving_ratios=ratios)
        run.check("halving_ratio", ratios, [lo, hi], all(lo <= r <= hi for r in ratios))
        run.write_rows("halving.csv", ["dt", "residual"], zip(dts, residuals))
        line_plot(run.out / "halving.svg", {"residual": (dts, residuals)},
                  title="enstrophy residual", xlabel="dt", logx=True, logy=True)


def run_wongzakai(run: _Run) -> None:
    cfg, fam, _noise, xi0, ubar0 = run.setup()
    meshes = [float(m) for m in run.study["meshes"]]
    ref = run.study.get("reference")
    try:
        table = an.wong_zakai_study(run.doc["noise"].get("seed", 0), meshes, cfg, fam, xi0, ubar0,
                                    reference=ref, slack=run.tol.get("slack", 0.10))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    run.write_rows("wong_zakai.csv", ["mesh", "sup_h0", "l2_h1"], table.rows())
    line_plot(run.out / "wong_zakai.svg", {"C_T H^0": (table.meshes, table.sup_h0),
                                          "L^2_T H^1": (table.meshes, table.l2_h1)},
              title="Wong-Zakai errors", xlabel="mesh", logx=True, logy=True)
    limit = run.tol.get("final_ratio", 1.0 / 3.0)
    run.metrics.update(meshes=table.meshes, sup_h0=table.sup_h0, l2_h1=table.l2_h1,
                       final_ratio=table.final_ratio)
    run.check("monotone", table.monotone, True, table.monotone)
    run.check("final_ratio", table.final_ratio, limit, table.final_ratio <= limit)


def run_stability(run: _Run) -> None:
    cfg, fam, noise, xi0, ubar0 = run.setup()
    if noise is None:
        raise ConfigError("stability needs noise")
    scales = [float(s) for s in run.study.get("scales", [])]
    if scales:
        rows = an.stability_study(noise, [noise.scaled(1 + e) for e in scales], cfg, fam,
                                  xi0, ubar0, p=run.study.get("p", 2.5))
        run.write_rows("stability.csv", ["scale", "rough_path_distance", "solution_distance"],
                       [(e, r["rough_path_distance"], r["solution_distance"]) for e, r in zip(scales, rows)])
        order = np.argsort(scales)[::-1]
        sol = [rows[i]["solution_distance"] for i in order]
        run.metrics["stability"] = [dict(scale=scales[i], **rows[i]) for i in order]
        run.check("solution_distance_decreasing", sol, None,
                  all(b <= a for a, b in zip(sol[:-1], sol[1:])))
        line_plot(run.out / "stability.svg",
                  {"solution": ([rows[i]["rough_path_distance"] for i in order], sol)},
                  title="continuity in the rough path", xlabel="rough path distance",
                  logx=True, logy=True)
    eps = [float(e) for e in run.study.get("epsilons", [])]
    if eps:
        rep = an.contraction_study(xi0, ubar0, cfg, fam, noise, eps, seed=cfg.seed + 1)
        run.metrics.update(contraction_eps=rep.epsilons, contraction_sup=rep.sup_distances,
                           gronwall_constant=rep.gronwall_constant,
                           linear_within=rep.linear_within)
        run.check("contraction_linear", rep.linear_within, 3.0, rep.linear)
        run.check("gronwall_constant_finite", rep.gronwall_constant, None,
                  math.isfinite(rep.gronwall_constant))


def run_remainder(run: _Run) -> None:
    cfg, fam, noise, xi0, ubar0 = run.setup()
    if noise is None:
        raise ConfigError("remainder study needs noise")
    sizes = [float(h) for h in run.study["sizes"]]
    p = run.study.get("p", 2.5)
    m = run.study.get("m", -2)
    kmax = run.study.get("max_intervals", 64)

    def study(c):
        T = c.torus
        fam_c = build_family(run.doc, T)
        xi, ub = build_initial(run.doc, T)
        traj = so.solve(xi, ub, c, fam_c, noise)
        return an.remainder_scaling(traj, fam_c, rp.lift_piecewise_linear(noise), sizes,
                                    max_intervals=kmax, m=m, p=p)

    sc = study(cfg)
    run.write_rows("remainder.csv", ["size", "mean_norm", "intervals"],
                   zip(sc.sizes.tolist(), sc.mean_norms.tolist(), sc.counts.tolist()))
    line_plot(run.out / "remainder.svg", {"mean |u_nat|_{-2}": (sc.sizes, sc.mean_norms)},
              title="remainder scaling", xlabel="t - s", logx=True, logy=True)
    run.metrics.update(slope=sc.slope, sizes=sc.sizes.tolist(), mean_norms=sc.mean_norms.tolist())
    default = 2.8 if run.doc["noise"].get("kind") in ("smooth", "linear") else 3.0 / p - 0.15
    lo = run.tol.get("min_slope", default)
    run.check("slope", sc.slope, lo, sc.slope >= lo)
    if run.study.get("gate", False):
        fine = study(solver_config(run.doc, N=2 * cfg.N))
        change = float(np.max(np.abs(fine.mean_norms - sc.mean_norms) / sc.mean_norms))
        tol = run.tol.get("gate_tol", 0.05)
        run.metrics["truncation_change"] = change
        run.check("truncation_gate", change, tol, change < tol)


def run_pressure(run: _Run) -> None:
    cfg, fam, noise, xi0, ubar0 = run.setup()
    traj = so.solve(xi0, ubar0, cfg, fam, noise)
    lift = rp.lift_piecewise_linear(noise) if noise is not None else None
    res = an.pressure_recovery(traj, fam, lift)
    T = cfg.torus
    norms = [math.sqrt(T.norm2(p)) for p in res.pi]
    run.write_rows("pressure.csv", ["t", "pi_h0"], zip(res.times.tolist(), norms))
    line_plot(run.out / "pressure.svg", {"|pi_t|_0": (res.times, norms)}, title="pressure",
              xlabel="t")
    tol = run.tol.get("sector_tol", 1e-10)
    run.metrics.update(sector_defect=res.sector_defect, pi_final_h0=norms[-1])
    run.check("gradient_sector", res.sector_defect, tol, res.sector_defect <= tol)
    if res.sewing is not None:
        run.metrics["sewing_differences"] = res.sewing.differences
        run.metrics["sewing_converged"] = res.sewing.converged
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
        add = float(np.max(np.abs(whole - parts)) / max(1e-300, np.max(np.abs(whole)) or 1.0))
        tol = run.tol.get("additivity_tol", 1e-10)
        run.metrics["sewing_additivity"] = add
        run.check("sewing_additivity", add, tol, add <= tol)


def run_tstar(run: _Run) -> None:
    st = run.study
    consts = so.BihariConstants(C=st.get("C", 1.0), C3=st.get("C3", 1.0), C_eps=st.get("C_eps", 1.0),
                                p=st.get("p", 2.5), L=st.get("L", 1.0), kappa=st.get("kappa", 1.0),
                                q=st.get("q"))
    cfg = solver_config(run.doc)
    T = cfg.torus
    fam = build_family(run.doc, T)
    noise = build_noise(run.doc, fam.K, cfg.T)
    xi0, ubar0 = build_initial(run.doc, T)
    xi0_norm = st.get("xi0_norm", sp.sobolev_norm(xi0, 0))
    omega = 0.0
    if noise is not None:
        lift = rp.lift_piecewise_linear(noise)
        omega = float(rp.control_omega_Z(lift, consts.p)(0.0, cfg.T))
    try:
        tstar = so.tstar_estimate(xi0_norm, ubar0, omega, consts)
    except so.NoHorizonError as exc:
        raise NumericalFailure(str(exc)) from None
    run.metrics.update(tstar=tstar, omega_Z_horizon=omega, xi0_norm=xi0_norm)
    run.check("tstar_positive", tstar, 0.0, tstar > 0)
    if st.get("solve", False):
        try:
            traj = so.solve(xi0, ubar0, cfg, fam, noise)
            run.metrics["observed_horizon"] = float(traj.times[-1])
            run.metrics["observed_blowup"] = False
            _trajectory_outputs(run, traj)
        except so.HorizonReached as exc:
            run.metrics["observed_horizon"] = float(exc.trajectory.times[-1])
            run.metrics["observed_blowup"] = True


RUNNERS = {"solve": run_solve, "enstrophy": run_enstrophy, "wongzakai": run_wongzakai,
           "stability": run_stability, "remainder": run_remainder, "pressure": run_pressure,
           "tstar": run_tstar}


# -- presets ------------------------------------------------------------------------
def _preset(kind, description, **sections):
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind}
    doc.update(sections)
    return description, doc


PRESETS = dict([
    ("taylor-green-2d", _preset(
        "enstrophy", "Taylor-Green vortex without noise; exact viscous decay",
        solver={"d": 2, "N": 16, "nu": 0.01, "dt": 1e-3, "T": 1.0},
        initial={"kind": "taylor-green"})),
    ("enstrophy-bm-2d", _preset(
        "enstrophy", "2D enstrophy balance under Brownian transport noise",
        solver={"d": 2, "N": 32, "nu": 0.01, "dt": 2.0 ** -12, "T": 0.5},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.25},
        noise={"kind": "brownian", "seed": 7, "mesh": 2.0 ** -10},
        initial={"kind": "random", "norm": 1.0, "seed": 3, "band": 4})),
    ("wong-zakai-2d", _preset(
        "wongzakai", "Piecewise-linear Brownian interpolations refined towards the reference",
        solver={"d": 2, "N": 32, "nu": 0.01, "dt": 2.0 ** -11, "T": 0.5},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.5},
        noise={"kind": "brownian", "seed": 11},
        initial={"kind": "random", "norm": 2.0, "seed": 3, "band": 4},
        study={"meshes": [2.0 ** -j for j in range(4, 10)], "reference": 2.0 ** -10})),
    ("moving-frame-2d", _preset(
        "solve", "Constant transport field: noisy run equals the shifted deterministic run",
        solver={"d": 2, "N": 32, "nu": 0.01, "dt": 1e-3, "T": 0.5},
        family={"kind": "constant", "vectors": [[1.0, 0.0], [0.3, 0.7]]},
        noise={"kind": "brownian", "seed": 5, "mesh": 2e-3},
        initial={"kind": "random", "norm": 5.0, "seed": 2, "band": 4},
        study={"moving_frame": True})),
    ("local-3d", _preset(
        "solve", "Small-data 3D run with vortex stretching",
        solver={"d": 3, "N": 8, "nu": 0.1, "dt": 1e-2, "T": 0.5},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.5},
        noise={"kind": "brownian", "seed": 2, "mesh": 2.0 ** -6},
        initial={"kind": "random", "norm": 0.1, "seed": 4, "band": 3})),
    ("tstar-3d", _preset(
        "tstar", "Bihari horizon estimate with surrogate constants next to a 3D run",
        solver={"d": 3, "N": 8, "nu": 0.1, "dt": 1e-2, "T": 0.5},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.5},
        noise={"kind": "brownian", "seed": 2, "mesh": 2.0 ** -6},
        initial={"kind": "random", "norm": 0.1, "seed": 4, "band": 3},
        study={"C": 1.0, "C3": 1.0, "C_eps": 1.0, "p": 2.5, "L": 1.0, "kappa": 1.0,
               "solve": True})),
    ("pressure-2d", _preset(
        "pressure", "Pressure recovered from the drift and the sewn Q-germ",
        solver={"d": 2, "N": 16, "nu": 0.01, "dt": 2.0 ** -10, "T": 0.25},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.5},
        noise={"kind": "brownian", "seed": 5, "mesh": 2.0 ** -8},
        initial={"kind": "random", "norm": 2.0, "seed": 3, "band": 4})),
    ("remainder-scaling-2d", _preset(
        "remainder", "Remainder decay against interval length for a smooth driver",
        solver={"d": 2, "N": 16, "nu": 0.0, "dt": 2.0 ** -12, "T": 0.5},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.5,
                "mean_free": False},
        noise={"kind": "smooth", "mesh": 2.0 ** -12, "frequencies": [3.0, 2.0]},
        initial={"kind": "random", "norm": 1e-4, "seed": 3, "band": 4},
        study={"sizes": [2.0 ** -j for j in range(3, 9)], "gate": True})),
    ("stability-2d", _preset(
        "stability", "Continuity in the driver and in the initial vorticity",
        solver={"d": 2, "N": 16, "nu": 0.01, "dt": 2.0 ** -9, "T": 0.25},
        family={"kind": "random", "K": 2, "seed": 1, "band": 2, "amplitude": 0.5},
        noise={"kind": "brownian", "seed": 9, "mesh": 2.0 ** -8},
        initial={"kind": "random", "norm": 2.0, "seed": 3, "band": 4},
        study={"scales": [1e-1, 1e-2, 1e-3], "epsilons": [1e-2, 1e-3, 1e-4]})),
])


def list_presets() -> list[tuple[str, str]]:
    return [(name, desc) for name, (desc, _doc) in PRESETS.items()]


def preset_config(name: str) -> dict:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; see `roughns presets`")
    return validate_config(PRESETS[name][1])


# -- driver -------------------------------------------------------------------------
def output_dir(doc: dict, name: str, override: str | None = None) -> Path:
    """``--output`` wins; otherwise ``config.output`` (default: the config or preset name)
    under ``$ROUGHNS_OUTPUT_ROOT`` (default ``runs``).  An absolute ``config.output``
    is used as is unless the environment variable is set."""
    if override:
        return Path(override)
    out = Path(doc.get("output", name))
    root = os.environ.get("ROUGHNS_OUTPUT_ROOT")
    if root is None:
        return out if out.is_absolute() else Path("runs") / out
    return Path(root) / (out.name if out.is_absolute() else out)


def execute(doc: dict, outdir: Path) -> tuple[int, dict]:
    """Run a validated config; returns ``(exit status, summary)``."""
    outdir.mkdir(parents=True, exist_ok=True)
    run = _Run(doc, outdir)
    status, error = 0, None
    try:
        RUNNERS[doc["kind"]](run)
    except ConfigError:
        raise
    except (NumericalFailure, so.HorizonReached, an.SewingDivergence, so.NoHorizonError) as exc:
        status, error = 3, f"{type(exc).__name__}: {exc}"
    if status == 0 and not all(c["passed"] for c in run.checks.values()):
        status = 1
    summary = {"artifact_version": __version__, "config_hash": config_hash(doc), "config": doc,
               "metrics": _jsonable(run.metrics), "checks": run.checks, "status": status}
    if error:
        summary["error"] = error
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return status, summary


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="roughns", description="Rough Navier-Stokes experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment")
    p_run.add_argument("config", nargs="?", help="TOML configuration file")
    p_run.add_argument("--preset", help="run a named preset instead of a file")
    p_run.add_argument("--output", help="output directory (overrides config and env)")
    sub.add_parser("presets", help="list presets")
    p_val = sub.add_parser("validate", help="validate a configuration file")
    p_val.add_argument("config")
    args = parser.parse_args(argv)

    if args.command == "presets":
        for name, desc in list_presets():
            print(f"{name:24s} {desc}")
        return 0
    try:
        if args.command == "validate":
            load_config(args.config)
            print(f"{args.config}: ok")
            return 0
        if bool(args.config) == bool(args.preset):
            raise ConfigError("give either a config file or --preset")
        if args.preset:
            doc, name = preset_config(args.preset), args.preset
        else:
            doc, name = load_config(args.config), Path(args.config).stem
        outdir = output_dir(doc, name, args.output)
        status, summary = execute(doc, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    for check, body in summary["checks"].items():
        print(f"{'PASS' if body['passed'] else 'FAIL'} {check}: {body['value']}")
    if "error" in summary:
        print(f"numerical failure: {summary['error']}", file=sys.stderr)
    print(f"wrote {outdir / 'summary.json'}")
    return status


if __name__ == "__main__":
    sys.exit(main())
