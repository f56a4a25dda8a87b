"""Transport vector fields sigma_k and the operators built from them.

Sign convention: the equation reads

    du + [(u.grad)u + grad p] dt = nu Lap u dt + [(sigma_k.grad)u + (grad sigma_k)u] dz^k

with ``((grad sigma)u)_i = u^j d_i sigma^j``.  For the vorticity,
``L_sigma phi = (sigma.grad)phi - 1_{d=3} (phi.grad)sigma``.

Second-level operators contract as ``A2 = L_k L_l ZZ[l, k]``: the outer
operator index pairs with the second index of the level-2 increment.
All outputs are truncated to the Galerkin band of the field's torus.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import spectral as sp
from .roughpath import DriverIncrement
from .spectral import SpectralField, Torus

FORMS = ("vorticity", "velocity-P", "velocity-Q")


def plane_wave(T: Torus, k, direction, amplitude: float = 1.0, phase: float = 0.0) -> SpectralField:
    """``amplitude * direction * cos(k.x + phase)``; divergence-free iff ``direction . k = 0``.

    ``k = 0`` gives the constant field ``amplitude * direction * cos(phase)``.
    """
    k = np.asarray(k, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if k.shape != (T.d,) or direction.shape != (T.d,):
        raise ValueError("k and direction need d entries")
    if abs(k @ direction) > 1e-14 * max(1.0, np.linalg.norm(k) * np.linalg.norm(direction)):
        raise ValueError("direction must be orthogonal to k for a divergence-free wave")

    def values(*x):
        arg = sum(kk * xx for kk, xx in zip(k, x)) + phase
        return amplitude * direction.reshape((T.d,) + (1,) * T.d) * np.cos(arg)

    return sp.from_function(T, values)


def random_sigma(T: Torus, seed=0, band: int = 2, amplitude: float = 0.5,
                 mean_free: bool = True) -> SpectralField:
    """Random divergence-free field with modes ``|k|_inf <= band`` and ``|sigma|_0 / (2 pi)^{d/2} = amplitude``."""
    coef = sp.leray_project(sp.random_field(T, T.d, seed=seed, band=band)).coef.copy()
    if mean_free:
        coef[(slice(None),) + (0,) * T.d] = 0.0
    rms = np.sqrt(T.norm2(coef) / T.volume)
    if rms == 0:
        raise ValueError("band too small for a nonzero field")
    return SpectralField(T, coef * (amplitude / rms))


def random_family(T: Torus, K: int, seed=0, band: int = 2, amplitude: float = 0.5,
                  mean_free: bool = True) -> "VectorFieldFamily":
    """K independent draws of :func:`random_sigma` from one seed."""
    seeds = np.random.SeedSequence(seed).spawn(K)
    return VectorFieldFamily(T, [random_sigma(T, s, band, amplitude, mean_free) for s in seeds])


class VectorFieldFamily:
    """K divergence-free band-limited vector fields with cached grid samples."""

    def __init__(self, T: Torus, sigmas, tol: float = 1e-12):
        sigmas = list(sigmas)
        for i, s in enumerate(sigmas):
            if s.torus != T:
                raise ValueError(f"sigma_{i + 1} lives on {s.torus}, expected {T}")
            if s.components != T.d:
                raise ValueError(f"sigma_{i + 1} is not a vector field")
            if s.divergence_defect() > tol:
                raise ValueError(f"sigma_{i + 1} is not divergence-free")
        self.torus = T
        self.sigmas = sigmas
        self.K = len(sigmas)
        d = T.d
        if self.K:
            coef = np.stack([s.coef for s in sigmas])            # (K, j, spec)
        else:
            coef = np.zeros((0, d) + T.shape, dtype=complex)
        self.coef = coef
        self.mean = coef[(slice(None), slice(None)) + (0,) * d].real.copy()  # (K, d)
        # d_i sigma^j and d_n d_m sigma^l, spectral then on the grid
        self.dcoef = np.stack([1j * kk * coef for kk in T.k], axis=1)      # (K, i, j, spec)
        self.grid = T.to_grid(coef)                                        # (K, j, grid)
        self.fluct_grid = self.grid - self.mean.reshape(self.mean.shape + (1,) * d)
        self.dgrid = T.to_grid(self.dcoef)                                 # (K, i, j, grid)
        ddcoef = np.stack([1j * kk * self.dcoef for kk in T.k], axis=1)    # (K, n, m, l, spec)
        self.ddgrid = T.to_grid(ddcoef)
        band = 0
        for kk in T.k:
            active = np.abs(coef).sum(axis=(0, 1)) > 1e-14
            if np.any(active):
                band = max(band, int(np.max(np.abs(np.broadcast_to(kk, T.shape)[active]))))
        self.band = band

    @property
    def d(self) -> int:
        return self.torus.d

    def is_constant(self, tol: float = 1e-14) -> bool:
        return bool(np.all(np.abs(self.fluct_grid) <= tol))

    def seminorm(self, m: int) -> float:
        """Grid maximum of the Frobenius norm of the order-m derivative tensor (max over k)."""
        if not 0 <= m <= 3:
            raise ValueError("seminorms up to order 3")
        T = self.torus
        coef = self.coef
        for _ in range(m):
            coef = np.stack([1j * kk * coef for kk in T.k], axis=1)
        if self.K == 0:
            return 0.0
        vals = T.to_grid(coef).reshape(self.K, -1, *T.grid_shape)
        return float(np.max(np.sqrt(np.sum(vals ** 2, axis=1))))

    # -- array-level operators; phi is (c, spec) ---------------------------
    def _check_shape(self, phi: np.ndarray, components: int) -> None:
        if phi.shape != (components,) + self.torus.shape:
            raise ValueError(f"field of shape {phi.shape} incompatible with "
                             f"{components} component(s) on {self.torus}")

    def lie_tilde_coef(self, k: int, phi: np.ndarray) -> np.ndarray:
        """``(sigma_k . grad) phi + (grad sigma_k) phi`` for a vector ``phi``."""
        T = self.torus
        self._check_shape(phi, T.d)
        pg = T.to_grid(phi)
        dpg = T.to_grid(T.grad(phi))                       # (c, i, grid)
        out = np.einsum("i...,ci...->c...", self.grid[k], dpg)
        out += np.einsum("j...,cj...->c...", pg, self.dgrid[k])
        return T.from_grid(out)

    def lie_vort_coef(self, k: int, phi: np.ndarray) -> np.ndarray:
        """``(sigma_k . grad) phi`` minus ``(phi . grad) sigma_k`` in 3D."""
        T = self.torus
        self._check_shape(phi, 1 if T.d == 2 else 3)
        dpg = T.to_grid(T.grad(phi))
        out = np.einsum("i...,ci...->c...", self.grid[k], dpg)
        if T.d == 3:
            out -= np.einsum("i...,ic...->c...", T.to_grid(phi), self.dgrid[k])
        return T.from_grid(out)

    def _lie(self, form: str):
        if form == "vorticity":
            return self.lie_vort_coef
        if form in ("velocity-P", "velocity-Q"):
            return self.lie_tilde_coef
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")

    def _project(self, form: str, coef: np.ndarray, final: bool) -> np.ndarray:
        if form == "vorticity":
            return coef
        P = sp.leray_project(SpectralField(self.torus, coef)).coef
        if final and form == "velocity-Q":
            return coef - P
        return P

    def _inc_check(self, inc: DriverIncrement) -> None:
        if inc.s > inc.t:
            raise ValueError(f"inconsistent increment ({inc.s}, {inc.t})")
        if np.shape(inc.Z) != (self.K,) or np.shape(inc.ZZ) != (self.K, self.K):
            raise ValueError(f"increment does not match K={self.K}")

    def A1_coef(self, inc: DriverIncrement, phi: np.ndarray, form: str = "vorticity") -> np.ndarray:
        lie = self._lie(form)
        self._inc_check(inc)
        out = np.zeros_like(phi, dtype=complex)
        for k in range(self.K):
            if inc.Z[k] != 0:
                out += inc.Z[k] * lie(k, phi)
        return self._project(form, out, final=True)

    def A2_coef(self, inc: DriverIncrement, phi: np.ndarray, form: str = "vorticity") -> np.ndarray:
        lie = self._lie(form)
        self._inc_check(inc)
        inner = [self._project(form, lie(l, phi), final=False) for l in range(self.K)]
        out = np.zeros_like(phi, dtype=complex)
        for k in range(self.K):
            mixed = sum(inc.ZZ[l, k] * inner[l] for l in range(self.K))
            if np.any(mixed != 0):
                out += lie(k, mixed)
        return self._project(form, out, final=True)

    def mean_density(self, v: np.ndarray) -> np.ndarray:
        """``G[k, m]`` = spatial average of ``v^l d_m sigma_k^l``."""
        T = self.torus
        vv = v.reshape(T.d, -1)
        dd = np.conj(self.dcoef).reshape(self.K, T.d, T.d, -1)
        return np.einsum("x,lx,kmlx->km", T.weight.reshape(-1), vv, dd).real

    def second_mean_density(self, v: np.ndarray) -> np.ndarray:
        """``H[j, k, m]`` = average of ``v^l (d_n s_j^l d_m s_k^n - s_j^n d_n d_m s_k^l)``."""
        T = self.torus
        vg = T.to_grid(v)
        first = np.einsum("l...,jnl...,kmn...->jkm...", vg, self.dgrid, self.dgrid)
        second = np.einsum("l...,jn...,knml...->jkm...", vg, self.grid, self.ddgrid)
        axes = tuple(range(-T.d, 0))
        return np.mean(first - second, axis=axes)


def _field(fam: VectorFieldFamily, phi: SpectralField) -> np.ndarray:
    if phi.torus != fam.torus:
        raise ValueError(f"dimension mismatch: {phi.torus} vs {fam.torus}")
    return phi.coef


def lie_tilde(sigma: SpectralField, phi: SpectralField) -> SpectralField:
    """``(sigma . grad) phi + (grad sigma) phi``, with ``((grad sigma)phi)_i = phi^j d_i sigma^j``."""
    if sigma.torus != phi.torus:
        raise ValueError(f"dimension mismatch: {sigma.torus} vs {phi.torus}")
    fam = VectorFieldFamily(sigma.torus, [sigma], tol=np.inf)
    return phi.with_coef(fam.lie_tilde_coef(0, phi.coef))


def lie_vort(sigma: SpectralField, phi: SpectralField) -> SpectralField:
    """``(sigma . grad) phi`` in 2D; ``(sigma . grad) phi - (phi . grad) sigma`` in 3D."""
    if sigma.torus != phi.torus:
        raise ValueError(f"dimension mismatch: {sigma.torus} vs {phi.torus}")
    fam = VectorFieldFamily(sigma.torus, [sigma], tol=np.inf)
    return phi.with_coef(fam.lie_vort_coef(0, phi.coef))


def apply_A1(fam: VectorFieldFamily, inc: DriverIncrement, phi: SpectralField,
             form: str = "vorticity") -> SpectralField:
    return phi.with_coef(fam.A1_coef(inc, _field(fam, phi), form))


def apply_A2(fam: VectorFieldFamily, inc: DriverIncrement, phi: SpectralField,
             form: str = "vorticity") -> SpectralField:
    return phi.with_coef(fam.A2_coef(inc, _field(fam, phi), form))


def quasi_chen_defect(fam: VectorFieldFamily, lift, s: float, theta: float, t: float,
                      phi: SpectralField) -> SpectralField:
    """``delta A^{Q,2}_{s theta t} phi - A^{Q,1}_{theta t} A^1_{s theta} phi``."""
    if not s <= theta <= t:
        raise ValueError(f"need s <= theta <= t, got ({s}, {theta}, {t})")
    u = _field(fam, phi)
    if u.shape[0] != fam.d:
        raise ValueError("quasi-Chen needs a velocity field")
    st, sm, mt = lift.increment(s, t), lift.increment(s, theta), lift.increment(theta, t)
    q2 = (fam.A2_coef(st, u, "velocity-Q") - fam.A2_coef(sm, u, "velocity-Q")
          - fam.A2_coef(mt, u, "velocity-Q"))
    chained = fam.A1_coef(mt, fam.A1_coef(sm, u, "velocity-P"), "velocity-Q")
    return phi.with_coef(q2 - chained)


def mean_functionals(fam: VectorFieldFamily, inc: DriverIncrement, v: SpectralField,
                     tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Mean increments ``(L1_st(v), L2_st(v))`` as spatial averages.

    ``L1^m = Z^k avg(v^l d_m s_k^l)`` and
    ``L2^m = ZZ[j,k] avg(v^l (d_n s_j^l d_m s_k^n - s_j^n d_n d_m s_k^l))``.
    """
    u = _field(fam, v)
    if u.shape[0] != fam.d:
        raise ValueError("mean functionals act on velocity fields")
    scale = max(1.0, float(np.max(np.abs(u))))
    if np.any(np.abs(v.mean()) > tol * scale):
        raise ValueError("mean functionals need a mean-free velocity")
    fam._inc_check(inc)
    L1 = inc.Z @ fam.mean_density(u) if fam.K else np.zeros(fam.d)
    L2 = np.einsum("jk,jkm->m", inc.ZZ, fam.second_mean_density(u)) if fam.K else np.zeros(fam.d)
    return np.asarray(L1, dtype=float), np.asarray(L2, dtype=float)


def operator_norm_ratio(fam: VectorFieldFamily, inc: DriverIncrement, level: int,
                        form: str = "vorticity", m: int = 0, band: int = 3) -> float:
    """Max over single Fourier modes of ``|A^i phi|_m / |phi|_{m+i}``."""
    T = fam.torus
    comps = 1 if (form == "vorticity" and T.d == 2) else T.d
    worst = 0.0
    rng = range(-band, band + 1)
    for key in np.array(np.meshgrid(*([rng] * T.d), indexing="ij")).reshape(T.d, -1).T:
        if key[-1] < 0 or not np.any(key):
            continue
        for c in range(comps):
            coef = np.zeros((comps,) + T.shape, dtype=complex)
            idx = tuple(int(x) if i == T.d - 1 else int(x) % (2 * T.N + 1)
                        for i, x in enumerate(key))
            coef[(c,) + idx] = 1.0
            if comps == T.d:
                coef = sp.leray_project(SpectralField(T, coef)).coef
            coef = T.symmetrize(coef)
            base = T.norm2(coef, m + level)
            if base < 1e-20:
                continue
            op = fam.A1_coef if level == 1 else fam.A2_coef
            worst = max(worst, np.sqrt(T.norm2(op(inc, coef, form), m) / base))
    return float(worst)


# -- family specification files ----------------------------------------------
def write_family(fam: VectorFieldFamily, filename, tol: float = 1e-15) -> None:
    """JSON listing K, d and per-field nonzero modes ``(k, [re, im], component)``."""
    T = fam.torus
    keys = T.full_band_keys()
    fields = []
    for s in fam.sigmas:
        flat = T.to_full_band(s.coef)
        modes = [{"k": [int(x) for x in keys[i]], "amplitude": [float(flat[c, i].real), float(flat[c, i].imag)],
                  "component": int(c)}
                 for c in range(T.d) for i in range(keys.shape[0]) if abs(flat[c, i]) > tol]
        fields.append({"modes": modes})
    doc = {"version": 1, "K": fam.K, "d": T.d, "fields": fields}
    Path(filename).write_text(json.dumps(doc, indent=1))


def load_family(filename, T: Torus | None = None, N: int | None = None,
                tol: float = 1e-12) -> VectorFieldFamily:
    """Read a family file; the mode lists must be Hermitian-closed and divergence-free."""
    doc = json.loads(Path(filename).read_text())
    return family_from_modes(doc, T=T, N=N, tol=tol)


def family_from_modes(doc: dict, T: Torus | None = None, N: int | None = None,
                      tol: float = 1e-12) -> VectorFieldFamily:
    for key in ("K", "d", "fields"):
        if key not in doc:
            raise ValueError(f"family spec is missing {key!r}")
    d, K = int(doc["d"]), int(doc["K"])
    if len(doc["fields"]) != K:
        raise ValueError(f"K={K} but {len(doc['fields'])} fields listed")
    modes_all = []
    kmax = 0
    for field in doc["fields"]:
        table = {}
        for mode in field["modes"]:
            k = tuple(int(x) for x in mode["k"])
            if len(k) != d:
                raise ValueError(f"mode {k} does not have d={d} entries")
            c = int(mode["component"])
            if not 0 <= c < d:
                raise ValueError(f"component {c} out of range")
            re, im = mode["amplitude"]
            table[(k, c)] = table.get((k, c), 0) + complex(re, im)
            kmax = max(kmax, max(abs(x) for x in k))
        modes_all.append(table)
    if T is None:
        T = sp.torus(d, max(N or 1, kmax, 1))
    if T.d != d:
        raise ValueError(f"family is {d}D but torus is {T.d}D")
    if kmax > T.N:
        raise ValueError(f"family needs N >= {kmax}, torus has N={T.N}")
    sigmas = []
    keys = T.full_band_keys()
    lookup = {tuple(map(int, key)): i for i, key in enumerate(keys)}
    for n, table in enumerate(modes_all):
        for (k, c), amp in table.items():
            partner = table.get((tuple(-x for x in k), c), 0)
            if abs(partner - np.conj(amp)) > tol * max(1.0, abs(amp)):
                raise ValueError(f"sigma_{n + 1}: mode {k} component {c} lacks its Hermitian partner")
        flat = np.zeros((d, keys.shape[0]), dtype=complex)
        for (k, c), amp in table.items():
            flat[c, lookup[k]] = amp
        for i, key in enumerate(keys):
            if abs(flat[:, i] @ key) > tol * max(1.0, np.abs(flat[:, i]).max() * np.abs(key).max()):
                raise ValueError(f"sigma_{n + 1} is not divergence-free at mode {tuple(key)}")
        sigmas.append(SpectralField(T, T.from_full_band(flat)))
    return VectorFieldFamily(T, sigmas, tol=tol)
