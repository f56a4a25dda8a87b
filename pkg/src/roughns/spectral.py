"""Fourier fields on the torus [0, 2pi)^d and the vector calculus acting on them.

A field is stored by its coefficients ``u_k`` in ``u(x) = sum_k u_k exp(i k.x)``
for the band ``|k_i| <= N``.  Because fields are real, only the half space
``k_d >= 0`` is kept (real-FFT layout): axes ``0..d-2`` have length ``2N+1`` in
FFT order ``0, 1, .., N, -N, .., -1`` and the last axis has length ``N+1``.

Products are formed on a padded grid of ``M >= 3N+1`` points per axis, so
the band-limited part of any product of two band fields is exact (3/2 rule).
"""

from __future__ import annotations

import csv
import functools
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

TWO_PI = 2.0 * np.pi


class Torus:
    """Truncation band, padded quadrature grid and wavenumbers for ``T^d``."""

    def __init__(self, d: int, N: int, M: int | None = None, dealias: bool = True):
        if d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {d}")
        if N < 1:
            raise ValueError("truncation N must be >= 1")
        if M is None:
            M = sfft.next_fast_len(3 * N + 1) if dealias else 2 * N + 2
            while M % 2:
                M = sfft.next_fast_len(M + 1)
        if M % 2 or M < 2 * N + 2:
            raise ValueError(f"grid size {M} must be even and >= 2N+2 = {2 * N + 2}")
        self.d, self.N, self.M = d, N, M
        full = np.concatenate([np.arange(N + 1), np.arange(-N, 0)])
        half = np.arange(N + 1)
        axes = [full] * (d - 1) + [half]
        self.k = [ax.reshape([-1 if i == j else 1 for j in range(d)]).astype(float)
                  for i, ax in enumerate(axes)]
        self.shape = tuple(ax.size for ax in axes)
        self.ksq = sum(kk * kk for kk in self.k)
        self.inv_ksq = np.where(self.ksq > 0, 1.0 / np.where(self.ksq > 0, self.ksq, 1.0), 0.0)
        weight = np.where(self.k[-1] > 0, 2.0, 1.0)
        self.weight = np.broadcast_to(weight, self.shape)
        # scatter indices from the band into the padded rfft array
        pad_full = np.where(full >= 0, full, full + M)
        self._index = np.ix_(*([pad_full] * (d - 1) + [half]))
        self.grid_shape = (M,) * d
        self.spec_pad_shape = (M,) * (d - 1) + (M // 2 + 1,)

    def __eq__(self, other):
        return isinstance(other, Torus) and (self.d, self.N, self.M) == (other.d, other.N, other.M)

    def __hash__(self):
        return hash((self.d, self.N, self.M))

    def __repr__(self):
        return f"Torus(d={self.d}, N={self.N}, M={self.M})"

    @property
    def volume(self) -> float:
        return TWO_PI ** self.d

    def points(self) -> list[np.ndarray]:
        """Grid coordinates, each broadcastable to ``grid_shape``."""
        x = TWO_PI * np.arange(self.M) / self.M
        return [x.reshape([-1 if i == j else 1 for j in range(self.d)])
                for i in range(self.d)]

    # -- transforms on raw arrays; leading axes are components --------------
    def to_grid(self, coef: np.ndarray) -> np.ndarray:
        lead = coef.shape[:-self.d]
        pad = np.zeros(lead + self.spec_pad_shape, dtype=complex)
        pad[(Ellipsis,) + self._index] = coef
        axes = tuple(range(-self.d, 0))
        return sfft.irfftn(pad, s=self.grid_shape, axes=axes, norm="forward")

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.d, 0))
        spec = sfft.rfftn(values, axes=axes, norm="forward")
        return spec[(Ellipsis,) + self._index]

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """``int a . b dx`` for real fields given by coefficients (sum over components)."""
        return float(self.volume * np.sum(self.weight * (a * np.conj(b)).real))

    def norm2(self, a: np.ndarray, m: float = 0) -> float:
        """Squared ``W^{m,2}`` norm with weight ``(1 + |k|^2)^m``."""
        w = self.weight if m == 0 else self.weight * (1.0 + self.ksq) ** m
        return float(self.volume * np.sum(w * np.abs(a) ** 2))

    def grad(self, coef: np.ndarray) -> np.ndarray:
        """Gradient coefficients; a new axis of length d is inserted before the spatial axes."""
        return np.stack([1j * kk * coef for kk in self.k], axis=-self.d - 1)

    def symmetrize(self, coef: np.ndarray) -> np.ndarray:
        """Enforce Hermitian symmetry on the ``k_d = 0`` plane."""
        return self.from_grid(self.to_grid(coef))

    # -- full-band layout (lexicographic k from -N to N) ---------------------
    def full_band_keys(self) -> np.ndarray:
        rng = np.arange(-self.N, self.N + 1)
        grids = np.meshgrid(*([rng] * self.d), indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def to_full_band(self, coef: np.ndarray) -> np.ndarray:
        """Coefficients for every ``k`` in the band, lexicographic order."""
        keys = self.full_band_keys()
        lead = coef.shape[:-self.d]
        out = np.empty(lead + (keys.shape[0],), dtype=complex)
        neg = keys[:, -1] < 0
        src = np.where(neg[:, None], -keys, keys)
        idx = tuple(np.where(src[:, i] >= 0, src[:, i], src[:, i] + 2 * self.N + 1)
                    if i < self.d - 1 else src[:, i] for i in range(self.d))
        vals = coef[(Ellipsis,) + idx]
        out[...] = np.where(neg, np.conj(vals), vals)
        return out

    def from_full_band(self, flat: np.ndarray) -> np.ndarray:
        keys = self.full_band_keys()
        lead = flat.shape[:-1]
        keep = keys[:, -1] >= 0
        sel = keys[keep]
        idx = tuple(np.where(sel[:, i] >= 0, sel[:, i], sel[:, i] + 2 * self.N + 1)
                    if i < self.d - 1 else sel[:, i] for i in range(self.d))
        out = np.zeros(lead + self.shape, dtype=complex)
        out[(Ellipsis,) + idx] = flat[..., keep]
        return out


@functools.lru_cache(maxsize=32)
def torus(d: int, N: int, dealias: bool = True) -> Torus:
    return Torus(d, N, dealias=dealias)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real scalar (one component) or vector (d components) field."""

    torus: Torus
    coef: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=complex)
        if coef.ndim == self.torus.d:
            coef = coef[None]
        if coef.shape[1:] != self.torus.shape:
            raise ValueError(f"coefficient shape {coef.shape[1:]} does not match {self.torus}")
        if coef.shape[0] not in (1, self.torus.d):
            raise ValueError(f"{coef.shape[0]} components; need 1 or {self.torus.d}")
        object.__setattr__(self, "coef", coef)

    @property
    def d(self) -> int:
        return self.torus.d

    @property
    def N(self) -> int:
        return self.torus.N

    @property
    def components(self) -> int:
        return self.coef.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    def mean(self) -> np.ndarray:
        return self.coef[(slice(None),) + (0,) * self.d].real.copy()

    def with_coef(self, coef) -> "SpectralField":
        return SpectralField(self.torus, coef)

    def __add__(self, other):
        _check_same(self, other)
        return self.with_coef(self.coef + other.coef)

    def __sub__(self, other):
        _check_same(self, other)
        return self.with_coef(self.coef - other.coef)

    def __mul__(self, a: float):
        return self.with_coef(self.coef * a)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_coef(-self.coef)

    def norm(self, m: float = 0) -> float:
        return sobolev_norm(self, m)

    def divergence_defect(self) -> float:
        """Largest ``|k . u_k|`` relative to the largest ``|k||u_k|``."""
        if self.is_scalar:
            raise ValueError("divergence of a scalar field")
        div = sum(kk * c for kk, c in zip(self.torus.k, self.coef))
        scale = np.max(np.sqrt(self.torus.ksq) * np.sqrt(np.sum(np.abs(self.coef) ** 2, axis=0)))
        return float(np.max(np.abs(div)) / scale) if scale > 0 else 0.0

    def is_divergence_free(self, tol: float = 1e-12) -> bool:
        return self.divergence_defect() <= tol

    def is_mean_free(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.coef))))
        return bool(np.all(np.abs(self.mean()) <= tol * scale))


def _check_same(a: SpectralField, b: SpectralField) -> None:
    if a.torus != b.torus:
        raise ValueError(f"size mismatch: {a.torus} vs {b.torus}")
    if a.components != b.components:
        raise ValueError(f"component mismatch: {a.components} vs {b.components}")


def zeros(T: Torus, components: int = 1) -> SpectralField:
    return SpectralField(T, np.zeros((components,) + T.shape, dtype=complex))


def constant(T: Torus, value) -> SpectralField:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    coef = np.zeros((value.size,) + T.shape, dtype=complex)
    coef[(slice(None),) + (0,) * T.d] = value
    return SpectralField(T, coef)


def from_function(T: Torus, func) -> SpectralField:
    """Sample ``func(*x) -> array (c, grid)`` or scalar on the grid and transform."""
    values = np.asarray(func(*np.broadcast_arrays(*T.points())), dtype=float)
    values = np.broadcast_to(values, values.shape[:-T.d] + T.grid_shape)
    if values.ndim == T.d:
        values = values[None]
    return inverse_transform(T, values)


def random_field(T: Torus, components: int = 1, seed=None, band: int | None = None,
                 decay: float = 0.0) -> SpectralField:
    """Random real field with modes ``|k|_inf <= band`` and amplitude ``(1+|k|^2)^{-decay/2}``.

    Draws depend only on ``(seed, band, components)``, so the same seed gives
    the same field at every truncation ``N >= band``.
    """
    B = T.N if band is None else min(int(band), T.N)
    rng = np.random.default_rng(seed)
    axis = np.arange(-B, B + 1)
    keys = np.stack([g.reshape(-1) for g in np.meshgrid(*([axis] * T.d), indexing="ij")], axis=1)
    g = rng.standard_normal((components, keys.shape[0], 2)) @ np.array([1.0, 1j])
    g = 0.5 * (g + np.conj(g[:, ::-1]))            # reversed order is k -> -k
    if decay:
        g = g * (1.0 + np.sum(keys ** 2, axis=1)) ** (-decay / 2)
    flat = np.zeros((components, (2 * T.N + 1) ** T.d), dtype=complex)
    pos = np.zeros(keys.shape[0], dtype=np.int64)
    for i in range(T.d):
        pos = pos * (2 * T.N + 1) + keys[:, i] + T.N
    flat[:, pos] = g
    return SpectralField(T, T.from_full_band(flat))


def transform(field: SpectralField) -> np.ndarray:
    """Physical samples on the padded grid, shape ``(c, M, ..., M)``."""
    return field.torus.to_grid(field.coef)


def inverse_transform(T: Torus, grid: np.ndarray) -> SpectralField:
    """Band coefficients of grid samples (modes outside the band are dropped)."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == T.d:
        grid = grid[None]
    if grid.shape[1:] != T.grid_shape:
        raise ValueError(f"grid shape {grid.shape[1:]} does not match {T.grid_shape}")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid samples must be finite")
    return SpectralField(T, T.from_grid(grid))


def grid_l2_norm(T: Torus, grid: np.ndarray) -> float:
    """L^2 norm of grid samples with the measure dx on [0, 2pi)^d."""
    return float(np.sqrt(np.sum(grid ** 2) * T.volume / grid[0].size))


def _require_vector(u: SpectralField, what: str) -> None:
    if u.components != u.d:
        raise ValueError(f"{what} needs a vector field, got {u.components} component(s)")


def gradient(f: SpectralField) -> SpectralField:
    if not f.is_scalar:
        raise ValueError("gradient needs a scalar field")
    return f.with_coef(f.torus.grad(f.coef[0]))


def divergence(u: SpectralField) -> SpectralField:
    _require_vector(u, "divergence")
    return u.with_coef(sum(1j * kk * c for kk, c in zip(u.torus.k, u.coef))[None])


def laplacian(f: SpectralField) -> SpectralField:
    return f.with_coef(-f.torus.ksq * f.coef)


def leray_project(u: SpectralField) -> SpectralField:
    """``u_k - k (k . u_k) / |k|^2`` for ``k != 0``; the mean is untouched."""
    _require_vector(u, "Leray projection")
    T = u.torus
    kdotu = sum(kk * c for kk, c in zip(T.k, u.coef))
    return u.with_coef(np.stack([c - kk * kdotu * T.inv_ksq for kk, c in zip(T.k, u.coef)]))


def q_project(u: SpectralField) -> SpectralField:
    """Gradient part ``Q = I - P``."""
    return u - leray_project(u)


def curl(u: SpectralField) -> SpectralField:
    """Scalar ``d1 u2 - d2 u1`` in 2D, the usual curl in 3D."""
    _require_vector(u, "curl")
    T = u.torus
    ik = [1j * kk for kk in T.k]
    c = u.coef
    if T.d == 2:
        return u.with_coef((ik[0] * c[1] - ik[1] * c[0])[None])
    return u.with_coef(np.stack([ik[1] * c[2] - ik[2] * c[1],
                                 ik[2] * c[0] - ik[0] * c[2],
                                 ik[0] * c[1] - ik[1] * c[0]]))


def biot_savart(xi: SpectralField, tol: float = 1e-12) -> SpectralField:
    """Mean-free velocity with curl ``xi``.

    2D: ``grad_perp (-Lap)^{-1} xi`` with ``grad_perp psi = (d2 psi, -d1 psi)``.
    3D: ``curl (-Lap)^{-1} xi``.
    """
    T = xi.torus
    scale = max(1.0, float(np.max(np.abs(xi.coef))))
    if np.any(np.abs(xi.mean()) > tol * scale):
        raise ValueError("Biot-Savart needs a mean-free vorticity")
    ik = [1j * kk for kk in T.k]
    if T.d == 2:
        if not xi.is_scalar:
            raise ValueError("2D vorticity must be scalar")
        psi = xi.coef[0] * T.inv_ksq
        return xi.with_coef(np.stack([ik[1] * psi, -ik[0] * psi]))
    _require_vector(xi, "3D Biot-Savart")
    psi = xi.coef * T.inv_ksq
    return xi.with_coef(np.stack([ik[1] * psi[2] - ik[2] * psi[1],
                                  ik[2] * psi[0] - ik[0] * psi[2],
                                  ik[0] * psi[1] - ik[1] * psi[0]]))


def sobolev_norm(f: SpectralField, m: float) -> float:
    """``(sum_k (1+|k|^2)^m |f_k|^2 (2pi)^d)^{1/2}`` summed over components."""
    if abs(m) > 4:
        raise ValueError("|m| <= 4 supported")
    return float(np.sqrt(f.torus.norm2(f.coef, m)))


def gradient_norm(f: SpectralField) -> float:
    """``|grad f|_0`` (summed over components)."""
    T = f.torus
    return float(np.sqrt(T.volume * np.sum(T.weight * T.ksq * np.abs(f.coef) ** 2)))


def dealiased_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product truncated to the band.

    A scalar times a scalar or vector broadcasts; two vectors multiply
    componentwise.
    """
    if f.torus != g.torus:
        raise ValueError(f"size mismatch: {f.torus} vs {g.torus}")
    if not (f.is_scalar or g.is_scalar or f.components == g.components):
        raise ValueError("incompatible component counts")
    T = f.torus
    return SpectralField(T, T.from_grid(T.to_grid(f.coef) * T.to_grid(g.coef)))


def advect(u: SpectralField, f: SpectralField) -> SpectralField:
    """``(u . grad) f`` for scalar or vector ``f``, truncated to the band."""
    if u.torus != f.torus:
        raise ValueError(f"size mismatch: {u.torus} vs {f.torus}")
    _require_vector(u, "advection")
    T = u.torus
    ug = T.to_grid(u.coef)
    dfg = T.to_grid(T.grad(f.coef))  # (c, d, grid)
    return SpectralField(T, T.from_grid(np.einsum("i...,ci...->c...", ug, dfg)))


def trilinear(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """``b(u, v, w) = int ((u . grad) v) . w dx`` on the padded grid."""
    T = u.torus
    ug = T.to_grid(u.coef)
    dvg = T.to_grid(T.grad(v.coef))
    wg = T.to_grid(w.coef)
    integrand = np.einsum("i...,ci...,c...->...", ug, dvg, wg)
    return float(np.mean(integrand) * T.volume)


def smoothing_cutoff(f: SpectralField, eta: float) -> SpectralField:
    """Frequency cut-off ``J^eta``: keep ``|k|^2 <= floor(1/eta^2)``."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    keep = f.torus.ksq <= np.floor(1.0 / eta ** 2 + 1e-12)
    return f.with_coef(f.coef * keep)


# -- serialization ---------------------------------------------------------
_MAGIC = b"RNSF"


def write_field(field: SpectralField, filename) -> None:
    """Binary container: magic, ``<iii`` header (d, N, c), ``<c16`` coefficients.

    Coefficients cover the full band in lexicographic k order, component-major.
    """
    T = field.torus
    flat = T.to_full_band(field.coef)
    with Path(filename).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<iii", T.d, T.N, field.components))
        fh.write(flat.astype("<c16").tobytes())


def read_field(filename, dealias: bool = True) -> SpectralField:
    data = Path(filename).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError("not a spectral field container")
    d, N, c = struct.unpack("<iii", data[4:16])
    T = torus(d, N, dealias)
    count = c * (2 * N + 1) ** d
    flat = np.frombuffer(data[16:], dtype="<c16")
    if flat.size != count:
        raise ValueError(f"expected {count} coefficients, found {flat.size}")
    return SpectralField(T, T.from_full_band(flat.reshape(c, -1)))


def write_field_csv(field: SpectralField, filename) -> None:
    """Debug dump with columns ``k1..kd,component,re,im``."""
    T = field.torus
    keys = T.full_band_keys()
    flat = T.to_full_band(field.coef)
    with Path(filename).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"k{i + 1}" for i in range(T.d)] + ["component", "re", "im"])
        for comp in range(field.components):
            for key, val in zip(keys, flat[comp]):
                writer.writerow(list(map(int, key)) + [comp, f"{val.real:.17g}", f"{val.imag:.17g}"])
