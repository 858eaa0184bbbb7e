"""Exponential-moment duality for independent Brownian particles.

For F(mu) = exp(<mu, phi>) the particle expectation is available in closed
form: with

    v_t = N log(p_t * exp(phi / N))        (p_t the heat kernel)

one has E[exp(<mu_t, phi>)] = exp(<mu_0, v_t>) exactly, because particles are
independent and the expectation factorizes. v_t solves the viscous
Hamilton-Jacobi equation dv = 1/2 Laplacian v + (1/2N)|grad v|^2 with v_0 =
phi, which is what the flow-property and maximum-principle tests check. The
transform is evaluated spectrally on a grid with a 4x band margin so the
pointwise exp/log round trip stays at rounding level for ||phi||_inf / N
of order one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .particles import ParticleEnsemble, ResolutionError, pair_empirical
from .regularization import RegParams
from .solver import heat_multiplier
from .torus import (
    GridField,
    GridSpec,
    _dealias_mask,
    _derivative_symbol,
    gradient,
    heat_semigroup,
)
from .noise import increment_field, sample_increment

__all__ = [
    "HJSolution",
    "solve_hj",
    "duality_expectation",
    "gaussian_baseline",
    "c2_bound",
    "DEFAULT_BAND_FACTOR",
]

DEFAULT_BAND_FACTOR = 4


@dataclass(frozen=True)
class HJSolution:
    """Hamilton-Jacobi value function at one time, on its refined grid."""

    v: GridField
    t: float
    n_particles: int


def _refine(phi: GridField, factor: int) -> GridField:
    """Re-sample a field on a grid ``factor`` times finer (spectral padding).

    The coarse Nyquist row/column is dropped: its coefficient aliases +-n/2
    and has no unambiguous fine-grid counterpart. Fields here are dealiased
    well below that band, so nothing is lost.
    """
    if factor == 1:
        return phi
    coarse = phi.spec
    fine = GridSpec(coarse.dim, coarse.n * factor)
    keep = _dealias_mask(coarse.dim, coarse.n, coarse.n // 2 - 1)
    src = np.where(keep, phi.spectrum, 0.0)
    spec = np.zeros(fine.shape, dtype=complex)
    k = np.fft.fftfreq(coarse.n, d=1.0 / coarse.n).astype(int)
    if coarse.dim == 1:
        spec[k % fine.n] = src
    else:
        ix = np.ix_(k % fine.n, k % fine.n)
        spec[ix] = src
    return GridField.from_spectrum(fine, spec)


def solve_hj(
    phi: GridField,
    n_particles: int,
    t: float,
    band_factor: int = DEFAULT_BAND_FACTOR,
) -> HJSolution:
    """Closed-form Hamilton-Jacobi solve via the exponential transform.

    Raises :class:`ResolutionError` if the smoothed exponential loses
    positivity on the refined grid (an under-resolution symptom).
    """
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    if n_particles < 1:
        raise ValueError(f"n_particles must be >= 1, got {n_particles}")
    if band_factor < 1 or (band_factor & (band_factor - 1)) != 0:
        raise ValueError(f"band_factor must be a power of two >= 1, got {band_factor}")
    phi_fine = _refine(phi, band_factor)
    w = GridField(phi_fine.spec, np.exp(phi_fine.values / n_particles))
    wt = heat_semigroup(w, t)
    if np.min(wt.values) <= 0.0:
        raise ResolutionError(
            "heat-smoothed exponential lost positivity; refine the grid or band factor"
        )
    v = GridField(phi_fine.spec, n_particles * np.log(wt.values))
    return HJSolution(v=v, t=t, n_particles=n_particles)


def duality_expectation(
    ens: ParticleEnsemble,
    phi: GridField,
    t: float,
    band_factor: int = DEFAULT_BAND_FACTOR,
) -> float:
    """Exact E[exp(<mu_t, phi>)] for the ensemble's initial positions."""
    if phi.spec.dim != ens.dim:
        raise ValueError(f"field dim {phi.spec.dim} != ensemble dim {ens.dim}")
    hj = solve_hj(phi, ens.n_particles, t, band_factor)
    return float(np.exp(pair_empirical(ens, hj.v)))


def c2_bound(f: GridField) -> float:
    """Spectral C^2-norm proxy: sup|f| + sum_i sup|d_i f| + sum_ij sup|d_ij f|."""
    total = float(np.max(np.abs(f.values)))
    grads = gradient(f)
    for g in grads:
        total += float(np.max(np.abs(g.values)))
        for gg in gradient(g):
            total += float(np.max(np.abs(gg.values)))
    return total


def gaussian_baseline(
    mu0: GridField,
    params: RegParams,
    T: float,
    dt: float,
    rng: np.random.Generator,
) -> GridField:
    """Linearized-fluctuation endpoint rho_T + N^{-1/2} rho_hat_T.

    rho follows the deterministic heat flow of ``mu0``; the fluctuation field
    solves d rho_hat = 1/2 Laplacian rho_hat dt + div(sqrt(rho v 0) dW) with
    the same truncated noise and the same exponential integrator as the
    nonlinear solver. Noise modes above the cutoff are absent; this is a
    truncated proxy of the full linearization and is used as a comparison
    curve only.
    """
    if T < 0:
        raise ValueError(f"horizon must be >= 0, got {T}")
    spec = mu0.spec
    if spec.dim != params.dim:
        raise ValueError(f"grid dim {spec.dim} != params dim {params.dim}")
    if spec.n < 4 * params.cutoff + 4:
        raise ValueError(
            f"grid n={spec.n} under-resolves cutoff M={params.cutoff}: need n >= 4M+4"
        )
    keep = _dealias_mask(spec.dim, spec.n, spec.dealias_band)
    rho_spec = np.where(keep, mu0.spectrum, 0.0)
    if T == 0:
        return GridField.from_spectrum(spec, rho_spec)
    steps = int(round(T / dt))
    if steps <= 0 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon T={T} is not an integer multiple of dt={dt}")
    mult = heat_multiplier(spec.dim, spec.n, dt)
    derivs = [_derivative_symbol(spec.dim, spec.n, ax) for ax in range(spec.dim)]
    hat_spec = np.zeros(spec.shape, dtype=complex)
    for _ in range(steps):
        sigma = np.sqrt(np.maximum(np.fft.ifftn(rho_spec).real * spec.n_points, 0.0))
        inc = sample_increment(params.cutoff, params.dim, dt, rng)
        dW = increment_field(inc.coeffs, inc.cutoff, inc.dim, spec)
        noise_spec = np.zeros(spec.shape, dtype=complex)
        for ax in range(spec.dim):
            noise_spec += derivs[ax] * (np.fft.fftn(sigma * dW[..., ax]) / spec.n_points)
        noise_spec = np.where(keep, noise_spec, 0.0)
        hat_spec = mult * (hat_spec + noise_spec)
        rho_spec = mult * rho_spec
    total = rho_spec + hat_spec / np.sqrt(params.n_particles)
    return GridField.from_spectrum(spec, total)
