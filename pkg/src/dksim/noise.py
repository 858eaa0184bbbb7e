"""Truncated Fourier white-in-time noise on the torus.

A noise increment over a step of length dt is the mode family

    dW(x) = sum_{|k|_inf <= M} e_k(x) dB^k,      e_k(x) = exp(2 pi i k . x),

with dB^k a complex d-vector per mode, subject to conj(dB^k) = dB^{-k} so the
assembled field is real. Independent scalars live on the half lattice (first
nonzero component of k positive) plus k = 0:

    Re dB^{k,i}, Im dB^{k,i} ~ N(0, dt/2)   for k != 0,
    dB^{0,i}                 ~ N(0, dt)     real.

This normalization makes the quadratic variation of a paired test functional
come out as dt * sum_{|k|<=M} |<g e_k, grad phi>|^2 (the calibration test
pins it down), which is the discrete counterpart of integral g^2 |grad phi|^2.

Draw order within a step is part of the reproducibility contract: first the
d components of dB^0, then for each half-lattice mode in lexicographic order
its d real parts followed by its d imaginary parts.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .regularization import RegParams, RegSqrt
from .torus import GridField, GridSpec, _dealias_mask, _derivative_symbol

__all__ = [
    "NoiseIncrement",
    "sample_increment",
    "noise_term",
    "mode_box",
    "half_modes",
    "draws_per_step",
    "increments_from_normals",
    "increment_field",
    "gradient_sq_sum",
    "derive_stream",
]


@lru_cache(maxsize=None)
def mode_box(cutoff: int, dim: int) -> np.ndarray:
    """All integer modes with |k|_inf <= cutoff, lexicographic, shape (B, dim)."""
    r = np.arange(-cutoff, cutoff + 1)
    if dim == 1:
        box = r.reshape(-1, 1)
    else:
        box = np.stack(np.meshgrid(r, r, indexing="ij"), axis=-1).reshape(-1, 2)
    box.setflags(write=False)
    return box


@lru_cache(maxsize=None)
def half_modes(cutoff: int, dim: int) -> np.ndarray:
    """Modes whose first nonzero component is positive, lexicographic order."""
    box = mode_box(cutoff, dim)
    picked = []
    for k in box:
        nz = k[k != 0]
        if nz.size and nz[0] > 0:
            picked.append(k)
    out = np.array(picked, dtype=np.int64).reshape(-1, dim)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _box_flat_indices(cutoff: int, dim: int) -> tuple[int, np.ndarray, np.ndarray]:
    """Flat positions (row-major over the (2M+1,)*dim box) of 0, +k and -k."""
    side = 2 * cutoff + 1
    half = half_modes(cutoff, dim)

    def flat(kk: np.ndarray) -> np.ndarray:
        idx = kk + cutoff
        out = idx[..., 0]
        for ax in range(1, dim):
            out = out * side + idx[..., ax]
        return out

    zero = int(flat(np.zeros((1, dim), dtype=np.int64))[0])
    return zero, flat(half), flat(-half)


def draws_per_step(cutoff: int, dim: int) -> int:
    """Standard-normal scalars consumed per increment."""
    n_half = half_modes(cutoff, dim).shape[0]
    return dim + 2 * dim * n_half


@dataclass(frozen=True)
class NoiseIncrement:
    """One sampled increment: ``coeffs[k + M, ..., i]`` is dB^{k,i}."""

    cutoff: int
    dim: int
    dt: float
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        side = 2 * self.cutoff + 1
        want = (side,) * self.dim + (self.dim,)
        if self.coeffs.shape != want:
            raise ValueError(f"coeffs shape {self.coeffs.shape}, expected {want}")

    def mode(self, k) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(k, dtype=int))
        if idx.shape != (self.dim,) or np.any(np.abs(idx) > self.cutoff):
            raise ValueError(f"mode {k} outside the |k|_inf <= {self.cutoff} box")
        return self.coeffs[tuple(idx + self.cutoff)]


def increments_from_normals(
    z: np.ndarray, cutoff: int, dim: int, dt: float
) -> np.ndarray:
    """Map standard normals (..., draws_per_step) to mirrored box coefficients.

    Returns a complex array shaped (..., 2M+1, [2M+1,] dim). Shared by the
    one-shot sampler and the batched ensemble drivers so the stream layout
    has a single definition.
    """
    z = np.asarray(z, dtype=float)
    n_draws = draws_per_step(cutoff, dim)
    if z.shape[-1] != n_draws:
        raise ValueError(f"need {n_draws} normals per step, got {z.shape[-1]}")
    side = 2 * cutoff + 1
    zero, pos, neg = _box_flat_indices(cutoff, dim)
    lead = z.shape[:-1]
    flat = np.zeros(lead + (side**dim, dim), dtype=complex)
    flat[..., zero, :] = np.sqrt(dt) * z[..., :dim]
    if pos.size:
        rest = z[..., dim:].reshape(lead + (-1, 2, dim))
        vals = np.sqrt(dt / 2.0) * (rest[..., 0, :] + 1j * rest[..., 1, :])
        flat[..., pos, :] = vals
        flat[..., neg, :] = np.conj(vals)
    return flat.reshape(lead + (side,) * dim + (dim,))


def sample_increment(
    cutoff: int, dim: int, dt: float, rng: np.random.Generator
) -> NoiseIncrement:
    """Draw one increment; dt = 0 yields exact zeros without consuming draws."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    side = 2 * cutoff + 1
    if dt == 0:
        coeffs = np.zeros((side,) * dim + (dim,), dtype=complex)
    else:
        z = rng.standard_normal(draws_per_step(cutoff, dim))
        coeffs = increments_from_normals(z, cutoff, dim, dt)
    return NoiseIncrement(cutoff=cutoff, dim=dim, dt=dt, coeffs=coeffs)


@lru_cache(maxsize=None)
def _grid_scatter_indices(cutoff: int, dim: int, n: int) -> np.ndarray:
    """Flat fft-layout position of each box mode on an n-per-axis grid."""
    box = mode_box(cutoff, dim)
    idx = box % n
    out = idx[:, 0]
    for ax in range(1, dim):
        out = out * n + idx[:, ax]
    out.setflags(write=False)
    return out


def increment_field(inc_coeffs: np.ndarray, cutoff: int, dim: int, spec: GridSpec) -> np.ndarray:
    """Assemble the real noise fields dW^i(x) on a grid.

    ``inc_coeffs`` is (..., box..., dim) as produced by
    :func:`increments_from_normals`; the result is (..., grid..., dim) real.
    """
    if spec.dim != dim:
        raise ValueError(f"grid dim {spec.dim} != noise dim {dim}")
    if spec.n < 2 * (2 * cutoff + 1):
        raise ValueError(
            f"grid n={spec.n} too coarse for cutoff M={cutoff}: need n >= {2 * (2 * cutoff + 1)}"
        )
    side = 2 * cutoff + 1
    lead = inc_coeffs.shape[: -(dim + 1)]
    flat = inc_coeffs.reshape(lead + (side**dim, dim))
    spect = np.zeros(lead + (spec.n_points, dim), dtype=complex)
    spect[..., _grid_scatter_indices(cutoff, dim, spec.n), :] = flat
    spect = np.moveaxis(spect, -1, 0).reshape((dim,) + lead + spec.shape)
    axes = tuple(range(-dim, 0))
    cvals = np.fft.ifftn(spect, axes=axes) * spec.n_points
    scale = max(float(np.max(np.abs(cvals))), 1e-300)
    resid = float(np.max(np.abs(cvals.imag))) / scale
    if resid > 1e-8:
        raise ValueError(f"noise assembly lost conjugate symmetry: residue {resid:.2e}")
    return np.moveaxis(cvals.real, 0, -1)


def noise_term(
    u: GridField, reg: RegSqrt, params: RegParams, inc: NoiseIncrement
) -> GridField:
    """Conservative noise contribution N^{-1/2} div(f(u) dW), dealiased.

    Pure function of its inputs; the k = 0 mode is exactly zero (the term is
    a perfect divergence), so mass is conserved to the bit.
    """
    spec = u.spec
    if spec.dim != params.dim or inc.dim != params.dim:
        raise ValueError("dimension mismatch between field, parameters and increment")
    if inc.cutoff != params.cutoff:
        raise ValueError(f"increment cutoff {inc.cutoff} != params cutoff {params.cutoff}")
    if spec.n < 4 * params.cutoff + 4:
        raise ValueError(
            f"grid n={spec.n} under-resolves cutoff M={params.cutoff}: need n >= 4M+4"
        )
    dW = increment_field(inc.coeffs, inc.cutoff, inc.dim, spec)
    g = np.asarray(reg.value(u.values))
    total = np.zeros(spec.shape, dtype=complex)
    for ax in range(spec.dim):
        prod_hat = np.fft.fftn(g * dW[..., ax]) / spec.n_points
        total += _derivative_symbol(spec.dim, spec.n, ax) * prod_hat
    total *= 1.0 / np.sqrt(params.n_particles)
    total = np.where(_dealias_mask(spec.dim, spec.n, spec.dealias_band), total, 0.0)
    return GridField.from_spectrum(spec, total)


def gradient_sq_sum(cutoff: int, dim: int) -> float:
    """sum over |k|_inf <= M of |2 pi k|^2 (mass-growth constant in L2 bounds)."""
    box = mode_box(cutoff, dim)
    return float(np.sum((2.0 * np.pi) ** 2 * np.sum(box.astype(float) ** 2, axis=1)))


def derive_stream(master_seed: int, *key: int) -> np.random.Generator:
    """Deterministic per-task RNG stream.

    Stream for path i of experiment row j is ``derive_stream(seed, j, i)``;
    row-level draws (initial particles) use ``derive_stream(seed, j)``. Built
    on Philox via SeedSequence spawn keys, so streams are counter-derived,
    independent, and stable across platforms.
    """
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))
