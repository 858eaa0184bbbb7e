"""Spectral calculus on the unit torus in one or two dimensions.

Fields live on uniform grids with points j/n per axis and are manipulated
through their Fourier coefficients under the convention

    f_hat(k) = integral of f(x) exp(-2 pi i k . x) dx,

so that values -> coefficients is ``fftn(values) / n**dim`` and the L2
pairing of two real fields is the plain grid average of their product
(rectangle rule, exact for band-limited integrands below Nyquist).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "GridField",
    "pairing",
    "gradient",
    "heat_semigroup",
    "mass",
    "dealias",
    "evaluate_at",
]


@lru_cache(maxsize=None)
def _integer_wavenumbers(n: int) -> np.ndarray:
    k = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
    k.setflags(write=False)
    return k


@lru_cache(maxsize=None)
def _axis_wavenumbers(dim: int, n: int) -> tuple[np.ndarray, ...]:
    """Integer wavenumbers for each axis, shaped for broadcasting."""
    k = _integer_wavenumbers(n)
    out = []
    for ax in range(dim):
        shape = [1] * dim
        shape[ax] = n
        ka = k.reshape(shape)
        ka.setflags(write=False)
        out.append(ka)
    return tuple(out)


@lru_cache(maxsize=None)
def _laplacian_symbol(dim: int, n: int) -> np.ndarray:
    """|2 pi k|^2 on the full grid of modes."""
    sym = np.zeros((n,) * dim)
    for ka in _axis_wavenumbers(dim, n):
        sym = sym + (2.0 * np.pi * ka) ** 2
    sym.setflags(write=False)
    return sym


@lru_cache(maxsize=None)
def _derivative_symbol(dim: int, n: int, axis: int) -> np.ndarray:
    # The unpaired Nyquist mode -n/2 has no conjugate partner; a first
    # derivative there would break conjugate symmetry, so it is dropped.
    k = _integer_wavenumbers(n).astype(float).copy()
    k[n // 2] = 0.0
    shape = [1] * dim
    shape[axis] = n
    sym = 2j * np.pi * k.reshape(shape)
    sym.setflags(write=False)
    return sym


@lru_cache(maxsize=None)
def _dealias_mask(dim: int, n: int, band: int) -> np.ndarray:
    keep = np.ones((n,) * dim, dtype=bool)
    for ka in _axis_wavenumbers(dim, n):
        keep &= np.abs(ka) <= band
    keep.setflags(write=False)
    return keep


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the unit torus.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1 or 2.
    n : int
        Points per axis; a power of two, at least 4.
    """

    dim: int
    n: int

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 4 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def n_points(self) -> int:
        return self.n**self.dim

    @property
    def dealias_band(self) -> int:
        """Largest retained |k|_inf under the 2/3-rule truncation."""
        return (self.n - 1) // 3

    def axes(self) -> tuple[np.ndarray, ...]:
        x = np.arange(self.n) / self.n
        return (x,) * self.dim

    def meshgrid(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Integer wavenumbers per axis, broadcastable to ``shape``."""
        return _axis_wavenumbers(self.dim, self.n)

    def laplacian_symbol(self) -> np.ndarray:
        return _laplacian_symbol(self.dim, self.n)


@dataclass(frozen=True, eq=False)
class GridField:
    """Real scalar field sampled on a :class:`GridSpec`.

    The Fourier spectrum is computed on first use and cached; instances are
    immutable (values are stored read-only).
    """

    spec: GridSpec
    values: np.ndarray
    _spectrum: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(
                f"values shape {vals.shape} does not match grid {self.spec.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_function(cls, spec: GridSpec, fn: Callable[..., np.ndarray]) -> "GridField":
        return cls(spec, np.asarray(fn(*spec.meshgrid()), dtype=float))

    @classmethod
    def from_spectrum(cls, spec: GridSpec, spectrum: np.ndarray) -> "GridField":
        """Build from Fourier coefficients (convention in the module docstring)."""
        spectrum = np.asarray(spectrum, dtype=complex)
        if spectrum.shape != spec.shape:
            raise ValueError(
                f"spectrum shape {spectrum.shape} does not match grid {spec.shape}"
            )
        cvals = np.fft.ifftn(spectrum) * spec.n_points
        scale = max(np.max(np.abs(cvals)), 1e-300)
        resid = np.max(np.abs(cvals.imag)) / scale
        if resid > 1e-8:
            raise ValueError(
                f"spectrum is not conjugate-symmetric: imaginary residue {resid:.2e}"
            )
        out = cls(spec, cvals.real)
        object.__setattr__(out, "_spectrum", spectrum.copy())
        return out

    @classmethod
    def constant(cls, spec: GridSpec, value: float) -> "GridField":
        return cls(spec, np.full(spec.shape, float(value)))

    # -- data access -------------------------------------------------------

    @property
    def spectrum(self) -> np.ndarray:
        """Fourier coefficients f_hat(k), indexed in fft order."""
        if self._spectrum is None:
            spec_arr = np.fft.fftn(self.values) / self.spec.n_points
            spec_arr.setflags(write=False)
            object.__setattr__(self, "_spectrum", spec_arr)
        return self._spectrum

    def mode(self, k: int | Sequence[int]) -> complex:
        """Single Fourier coefficient at integer wavenumber ``k``."""
        idx = np.atleast_1d(np.asarray(k, dtype=int))
        if idx.shape != (self.spec.dim,):
            raise ValueError(f"mode index must have {self.spec.dim} components")
        if np.any(np.abs(idx) > self.spec.n // 2):
            raise ValueError("mode outside the grid band")
        return complex(self.spectrum[tuple(idx % self.spec.n)])


def _check_same_spec(a: GridField, b: GridField) -> None:
    if a.spec != b.spec:
        raise ValueError(f"grid mismatch: {a.spec} vs {b.spec}")


def pairing(f: GridField, g: GridField) -> float:
    """L2 pairing <f, g> = integral of f*g over the unit torus (grid average)."""
    _check_same_spec(f, g)
    return float(np.mean(f.values * g.values))


def mass(f: GridField) -> float:
    """Total integral of f, i.e. the k = 0 Fourier coefficient."""
    return float(np.mean(f.values))


def gradient(f: GridField) -> tuple[GridField, ...]:
    """Spectral gradient, one component field per axis."""
    spec = f.spec
    out = []
    for ax in range(spec.dim):
        sym = _derivative_symbol(spec.dim, spec.n, ax)
        comp = np.fft.ifftn(sym * f.spectrum) * spec.n_points
        out.append(GridField(spec, comp.real))
    return tuple(out)


def heat_semigroup(f: GridField, t: float) -> GridField:
    """Apply exp(t/2 * Laplacian): multiply mode k by exp(-|2 pi k|^2 t / 2)."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got {t}")
    if t == 0:
        return f
    mult = np.exp(-0.5 * f.spec.laplacian_symbol() * t)
    return GridField.from_spectrum(f.spec, mult * f.spectrum)


def dealias(f: GridField, band: int | None = None) -> GridField:
    """Truncate the spectrum to |k|_inf <= band (default: the 2/3-rule band)."""
    spec = f.spec
    if band is None:
        band = spec.dealias_band
    if band < 0 or band > spec.n // 2:
        raise ValueError(f"band must lie in [0, {spec.n // 2}], got {band}")
    keep = _dealias_mask(spec.dim, spec.n, band)
    return GridField.from_spectrum(spec, np.where(keep, f.spectrum, 0.0))


def coarsen(f: GridField, coarse: GridSpec) -> GridField:
    """Spectral restriction onto a coarser grid.

    Keeps modes |k|_inf <= coarse.n/2 - 1 (the coarse Nyquist band is left
    empty to preserve conjugate symmetry). The kept coefficients are copied
    bit-for-bit; values-side quantities (mass, pairings) survive to machine
    precision through the inverse transform.
    """
    spec = f.spec
    if coarse.dim != spec.dim:
        raise ValueError(f"dim mismatch: {coarse.dim} vs {spec.dim}")
    if coarse.n > spec.n:
        raise ValueError(f"target grid n={coarse.n} is finer than source n={spec.n}")
    if coarse.n == spec.n:
        return f
    kept = np.arange(-(coarse.n // 2 - 1), coarse.n // 2)
    out = np.zeros(coarse.shape, dtype=complex)
    if spec.dim == 1:
        out[kept % coarse.n] = f.spectrum[kept % spec.n]
    else:
        out[np.ix_(kept % coarse.n, kept % coarse.n)] = f.spectrum[
            np.ix_(kept % spec.n, kept % spec.n)
        ]
    return GridField.from_spectrum(coarse, out)


def evaluate_at(f: GridField, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

    Exact for band-limited fields. Points are an (m,) array in d = 1 or an
    (m, 2) array in d = 2; coordinates are taken modulo 1.
    """
    spec = f.spec
    pts = np.asarray(points, dtype=float)
    if spec.dim == 1:
        pts = pts.reshape(-1)
        k = _integer_wavenumbers(spec.n)
        phases = np.exp(2j * np.pi * np.outer(pts, k))
        return (phases @ f.spectrum).real
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be shaped (m, 2) for a 2d grid")
    k = _integer_wavenumbers(spec.n)
    # contract one axis at a time: (m, n) x (n, n) -> (m, n), then row dots
    py = np.exp(2j * np.pi * np.outer(pts[:, 1], k))
    px = np.exp(2j * np.pi * np.outer(pts[:, 0], k))
    inner = py @ f.spectrum.T
    return np.einsum("mk,mk->m", px, inner).real
