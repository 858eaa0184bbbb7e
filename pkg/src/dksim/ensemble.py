"""Batched Monte Carlo drivers for path ensembles.

The single-path solver in :mod:`dksim.solver` is the readable reference;
these drivers advance many independent paths at once with the grid axis
vectorized over paths, which is what makes the weak-error study affordable.

Reproducibility contract
------------------------
Path ``i`` of experiment row ``row`` draws from
``derive_stream(master_seed, row, i)`` and from nothing else, so results are
bitwise independent of chunk size, block size and FFT worker count. Each
path consumes ``draws_per_step`` normals per time step in step order. All
reductions write into per-path slots first and are summed once at the end.

Both drivers that pair a field against a test function also return exact
(discrete-scheme) expectations used downstream as control-variate anchors:

* ``heat_mean``: E<u_T, phi> under the scheme. The noise term has zero mean
  and the update is linear in it, so the mean follows the pure heat flow.
* ``base_log_var``: Var<Y_T, phi> for the linearized path Y, a Gaussian whose
  per-step contribution is an explicit sum over noise modes; E exp<Y_T, phi>
  then has the closed form exp(mean + var/2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.fft as sfft

from .noise import (
    derive_stream,
    draws_per_step,
    _grid_scatter_indices,
    increments_from_normals,
)
from .regularization import RegParams, RegSqrt
from .solver import (
    ENTROPY_FLOOR_FACTOR,
    DEFAULT_BLOWUP_LIMIT,
    BlowUpError,
    _step_count,
    heat_multiplier,
)
from .torus import GridField, GridSpec, _dealias_mask, _derivative_symbol, _laplacian_symbol

__all__ = [
    "WeakErrorSamples",
    "StructureSamples",
    "ComparisonSamples",
    "weak_error_paths",
    "structure_paths",
    "comparison_paths",
]

ProgressFn = Callable[[int, int], None]


# -- shared stepping context -------------------------------------------------


@dataclass(frozen=True)
class _Ctx:
    spec: GridSpec
    params: RegParams
    dt: float
    steps: int
    workers: int
    mult: np.ndarray
    keep: np.ndarray
    deriv_stack: np.ndarray
    scatter: np.ndarray
    lam: np.ndarray
    draws: int
    inv_sqrt_n: float

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.shape

    @property
    def npts(self) -> int:
        return self.spec.n_points

    @property
    def dim(self) -> int:
        return self.spec.dim

    def grid_axes(self, lead: int) -> tuple[int, ...]:
        return tuple(range(lead, lead + self.dim))


def _make_ctx(spec: GridSpec, params: RegParams, T: float, dt: float, workers: int) -> _Ctx:
    if spec.dim != params.dim:
        raise ValueError(f"grid dim {spec.dim} != params dim {params.dim}")
    if spec.n < 4 * params.cutoff + 4:
        raise ValueError(
            f"grid n={spec.n} under-resolves cutoff M={params.cutoff}: need n >= 4M+4"
        )
    steps = _step_count(T, dt) if T > 0 else 0
    return _Ctx(
        spec=spec,
        params=params,
        dt=dt,
        steps=steps,
        workers=max(1, int(workers)),
        mult=heat_multiplier(spec.dim, spec.n, dt) if steps else np.ones(spec.shape),
        keep=_dealias_mask(spec.dim, spec.n, spec.dealias_band),
        deriv_stack=np.stack(
            [_derivative_symbol(spec.dim, spec.n, ax) for ax in range(spec.dim)]
        ),
        scatter=_grid_scatter_indices(params.cutoff, spec.dim, spec.n),
        lam=_laplacian_symbol(spec.dim, spec.n),
        draws=draws_per_step(params.cutoff, params.dim),
        inv_sqrt_n=1.0 / np.sqrt(params.n_particles),
    )


def _chunk_block(ctx: _Ctx, n_paths: int, chunk: int | None, block: int | None) -> tuple[int, int]:
    """Array-size driven defaults; both knobs only trade memory for speed."""
    if chunk is None:
        chunk = max(64, min(4096, int(32e6 // (ctx.npts * 16))))
    chunk = max(1, min(chunk, n_paths))
    if block is None:
        block = max(1, min(64, int(48e6 // (max(1, chunk) * ctx.draws * 8))))
    return chunk, max(1, block)


def _dW(coeffs: np.ndarray, ctx: _Ctx) -> np.ndarray:
    """Real noise fields for a batch: (P, box.., d) coeffs -> (P, d, grid..)."""
    P = coeffs.shape[0]
    flat = coeffs.reshape(P, len(ctx.scatter), ctx.dim)
    spect = np.zeros((P, ctx.npts, ctx.dim), dtype=complex)
    spect[:, ctx.scatter, :] = flat
    spect = np.moveaxis(spect, -1, 1).reshape((P, ctx.dim) + ctx.shape)
    vals = sfft.ifftn(spect, axes=ctx.grid_axes(2), workers=ctx.workers)
    return vals.real * ctx.npts


def _div_noise(vals: np.ndarray, dW: np.ndarray, ctx: _Ctx) -> np.ndarray:
    """Dealiased spectrum of div(vals * dW); ``vals`` is (P, grid..) or (grid..)."""
    prod = np.expand_dims(vals, axis=-ctx.dim - 1) * dW
    ph = sfft.fftn(prod, axes=ctx.grid_axes(2), workers=ctx.workers) / ctx.npts
    out = np.sum(ctx.deriv_stack * ph, axis=-ctx.dim - 1)
    return np.where(ctx.keep, out, 0.0)


def _values(u_hat: np.ndarray, ctx: _Ctx) -> np.ndarray:
    return sfft.ifftn(u_hat, axes=ctx.grid_axes(1), workers=ctx.workers).real * ctx.npts


def _to_spectrum(vals: np.ndarray, ctx: _Ctx) -> np.ndarray:
    return sfft.fftn(vals, axes=ctx.grid_axes(1), workers=ctx.workers) / ctx.npts


def _pair(u_hat: np.ndarray, phi_flat_conj: np.ndarray, ctx: _Ctx) -> np.ndarray:
    """<u, phi> per path via the spectral Parseval sum."""
    return np.einsum("pk,k->p", u_hat.reshape(u_hat.shape[0], ctx.npts), phi_flat_conj).real


def _guard(vals: np.ndarray, step_index: int, ctx: _Ctx, limit: float) -> None:
    sup = float(np.max(np.abs(vals)))
    if not np.isfinite(sup) or sup > limit:
        raise BlowUpError(
            f"a path blew up by step {step_index} (t={step_index * ctx.dt:.6g}): sup={sup:.3e}",
            step_index=step_index,
            t=step_index * ctx.dt,
        )


def _guard_spec(u_hat: np.ndarray, step_index: int, ctx: _Ctx, limit: float) -> None:
    # npts * max|u_hat| upper-bounds the sup norm; good enough for a tripwire.
    proxy = float(np.max(np.abs(u_hat))) * ctx.npts
    if not np.isfinite(proxy) or proxy > limit:
        raise BlowUpError(
            f"a path blew up by step {step_index} (t={step_index * ctx.dt:.6g}): "
            f"spectral bound {proxy:.3e}",
            step_index=step_index,
            t=step_index * ctx.dt,
        )


def _draw_block(gens: list[np.random.Generator], B: int, draws: int) -> np.ndarray:
    z = np.empty((len(gens), B, draws))
    for j, g in enumerate(gens):
        z[j] = g.standard_normal((B, draws))
    return z


def _prepare_ic(u0: GridField, ctx: _Ctx) -> np.ndarray:
    return np.where(ctx.keep, u0.spectrum, 0.0)


def _sigma_table(u0_hat: np.ndarray, ctx: _Ctx) -> np.ndarray:
    """Frozen baseline coefficients sqrt(max(rho_s, 0)) for every step start."""
    table = np.empty((ctx.steps,) + ctx.shape)
    rho = u0_hat.copy()
    for s in range(ctx.steps):
        table[s] = np.sqrt(
            np.maximum(sfft.ifftn(rho, workers=ctx.workers).real * ctx.npts, 0.0)
        )
        rho = ctx.mult * rho
    return table


def _baseline_log_var(phi_hat: np.ndarray, sigma: np.ndarray, ctx: _Ctx) -> float:
    """Exact variance of <Y_T, phi> over the truncated noise, summed per step."""
    var = 0.0
    for s in range(ctx.steps):
        psi_hat = phi_hat * np.exp(-0.5 * ctx.lam * ((ctx.steps - s) * ctx.dt))
        for ax in range(ctx.dim):
            dpsi = (
                sfft.ifftn(ctx.deriv_stack[ax] * psi_hat, workers=ctx.workers).real
                * ctx.npts
            )
            h_hat = sfft.fftn(sigma[s] * dpsi, workers=ctx.workers) / ctx.npts
            var += ctx.dt * float(np.sum(np.abs(h_hat.reshape(-1)[ctx.scatter]) ** 2))
    return var / ctx.params.n_particles


# -- weak-error driver -------------------------------------------------------


@dataclass(frozen=True)
class WeakErrorSamples:
    """Per-path endpoint pairings plus exact scheme-level moments."""

    n_paths: int
    steps: int
    dt: float
    heat_mean: float
    base_log_var: float
    spde_lin: np.ndarray
    base_lin: np.ndarray | None

    @property
    def base_exp_mean(self) -> float:
        """Exact E exp<Y_T, phi> for the Gaussian path (lognormal moment)."""
        return float(np.exp(self.heat_mean + 0.5 * self.base_log_var))


def weak_error_paths(
    u0: GridField,
    reg: RegSqrt,
    params: RegParams,
    phi: GridField,
    T: float,
    dt: float,
    master_seed: int,
    row: int,
    n_paths: int,
    with_baseline: bool = True,
    chunk: int | None = None,
    block: int | None = None,
    workers: int = 1,
    blowup_limit: float = DEFAULT_BLOWUP_LIMIT,
    progress: ProgressFn | None = None,
) -> WeakErrorSamples:
    """Sample <u_T, phi> over ``n_paths`` independent solutions.

    When ``with_baseline`` is set, the linearized Gaussian path Y is advanced
    through the same noise increments (same stream, same step), giving a
    strongly coupled comparison sample for variance reduction.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if u0.spec != phi.spec:
        raise ValueError("initial field and test function must share a grid")
    ctx = _make_ctx(u0.spec, params, T, dt, workers)
    u0_hat = _prepare_ic(u0, ctx)
    phi_hat = np.where(ctx.keep, phi.spectrum, 0.0)
    phi_conj = phi_hat.reshape(-1).conj()
    decay_T = np.exp(-0.5 * ctx.lam * T)
    heat_mean = float(np.sum(decay_T * u0_hat * np.conj(phi_hat)).real)

    if ctx.steps == 0:
        x0 = float(np.sum(u0_hat * np.conj(phi_hat)).real)
        lin = np.full(n_paths, x0)
        return WeakErrorSamples(
            n_paths=n_paths,
            steps=0,
            dt=dt,
            heat_mean=x0,
            base_log_var=0.0,
            spde_lin=lin,
            base_lin=lin.copy() if with_baseline else None,
        )

    sigma = _sigma_table(u0_hat, ctx) if with_baseline else None
    base_log_var = _baseline_log_var(phi_hat, sigma, ctx) if with_baseline else 0.0

    spde_lin = np.empty(n_paths)
    base_lin = np.empty(n_paths) if with_baseline else None
    chunk_sz, block_sz = _chunk_block(ctx, n_paths, chunk, block)
    for start in range(0, n_paths, chunk_sz):
        stop = min(start + chunk_sz, n_paths)
        gens = [derive_stream(master_seed, row, i) for i in range(start, stop)]
        P = stop - start
        u_hat = np.tile(u0_hat, (P,) + (1,) * ctx.dim)
        y_hat = u_hat.copy() if with_baseline else None
        step = 0
        while step < ctx.steps:
            B = min(block_sz, ctx.steps - step)
            z = _draw_block(gens, B, ctx.draws)
            for b in range(B):
                coeffs = increments_from_normals(
                    z[:, b], ctx.params.cutoff, ctx.dim, ctx.dt
                )
                dW = _dW(coeffs, ctx)
                u_vals = _values(u_hat, ctx)
                gu = reg.value(u_vals)
                u_hat = ctx.mult * (
                    u_hat + ctx.inv_sqrt_n * _div_noise(gu, dW, ctx)
                )
                if with_baseline:
                    y_hat = ctx.mult * (
                        y_hat + ctx.inv_sqrt_n * _div_noise(sigma[step + b], dW, ctx)
                    )
            step += B
            _guard_spec(u_hat, step, ctx, blowup_limit)
        spde_lin[start:stop] = _pair(u_hat, phi_conj, ctx)
        if with_baseline:
            base_lin[start:stop] = _pair(y_hat, phi_conj, ctx)
        if progress is not None:
            progress(stop, n_paths)
    return WeakErrorSamples(
        n_paths=n_paths,
        steps=ctx.steps,
        dt=dt,
        heat_mean=heat_mean,
        base_log_var=base_log_var,
        spde_lin=spde_lin,
        base_lin=base_lin,
    )


# -- structure (energy/entropy/positivity) driver ----------------------------


@dataclass(frozen=True)
class StructureSamples:
    """Ensemble statistics for the a-priori estimates.

    Trajectory rows are step-indexed means over all paths (times array gives
    the step times, including t = 0 and t = T); per-path scalars keep the
    full sample so callers can form standard errors.

    ``gradsq_integral`` is the exact dissipation integral int ||grad u(s)||^2 ds
    of the trajectory's piecewise heat interpolation (noise enters at step
    starts, exact heat flow in between), per mode (1 - e^{-|2 pi k|^2 dt}) on
    the post-noise spectrum. A left-rule sum dt ||grad u_n||^2 would overcount
    the top modes of rough states by orders of magnitude, since they decay
    within a fraction of a step.

    ``fisher_integral`` is the left-rule integral of 4 ||grad f_delta(u)||^2,
    which equals the classical Fisher information int |grad u|^2 / u wherever
    u >= delta and stays finite across the zero crossings a band-limited
    signed state necessarily has.
    """

    n_paths: int
    dt: float
    times: np.ndarray
    mean_entropy: np.ndarray
    se_entropy: np.ndarray
    energy_final: np.ndarray
    gradsq_integral: np.ndarray
    fisher_integral: np.ndarray
    neg_integral: np.ndarray
    neg_mass_final: np.ndarray
    min_value_final: np.ndarray
    mass_drift: float


def _clamped(vals: np.ndarray, dim: int) -> np.ndarray:
    grid_axes = tuple(range(-dim, 0))
    sup = np.max(np.abs(vals), axis=grid_axes, keepdims=True)
    floor = ENTROPY_FLOOR_FACTOR * sup
    return np.maximum(vals, np.maximum(floor, 1e-300))


def _entropy(vals: np.ndarray, dim: int) -> np.ndarray:
    """Per-path clamped entropy mean; matches solver.diagnostics."""
    clamped = _clamped(vals, dim)
    return np.mean(clamped * np.log(clamped), axis=tuple(range(-dim, 0)))


def _reg_fisher(gu_vals: np.ndarray, ctx: _Ctx) -> np.ndarray:
    """Per-path regularized Fisher information 4 ||grad f_delta(u)||^2."""
    gu_hat = _to_spectrum(gu_vals, ctx)
    out = np.zeros(gu_vals.shape[0])
    for ax in range(ctx.dim):
        comp = (
            sfft.ifftn(
                ctx.deriv_stack[ax] * gu_hat, axes=ctx.grid_axes(1), workers=ctx.workers
            ).real
            * ctx.npts
        )
        out += np.mean(comp**2, axis=tuple(range(-ctx.dim, 0)))
    return 4.0 * out


def structure_paths(
    u0: GridField,
    reg: RegSqrt,
    params: RegParams,
    T: float,
    dt: float,
    master_seed: int,
    row: int,
    n_paths: int,
    chunk: int | None = None,
    block: int | None = None,
    workers: int = 1,
    blowup_limit: float = DEFAULT_BLOWUP_LIMIT,
    progress: ProgressFn | None = None,
) -> StructureSamples:
    """Accumulate the functionals entering the energy and entropy estimates.

    Fisher and negative-part integrals use the left endpoint rule over step
    starts; the gradient-square integral is the exact dissipation of the
    piecewise heat interpolation (see StructureSamples).
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    ctx = _make_ctx(u0.spec, params, T, dt, workers)
    u0_hat = _prepare_ic(u0, ctx)
    steps = ctx.steps
    grid_axes = tuple(range(-ctx.dim, 0))
    spectral_axes = tuple(range(1, 1 + ctx.dim))
    # mean ||u_{n+1}||^2 = sum mult^2 |s|^2 with s the post-noise spectrum, so
    # per step the interpolation dissipates sum_k (1 - e^{-|2 pi k|^2 dt}) |s_k|^2.
    dissip_w = -np.expm1(-ctx.lam * ctx.dt)

    ent_sum = np.zeros(steps + 1)
    ent_sumsq = np.zeros(steps + 1)
    energy_final = np.empty(n_paths)
    gradsq_integral = np.zeros(n_paths)
    fisher_integral = np.zeros(n_paths)
    neg_integral = np.zeros(n_paths)
    neg_mass_final = np.empty(n_paths)
    min_value_final = np.empty(n_paths)
    mass0 = float(u0_hat.reshape(-1)[0].real)
    mass_drift = 0.0

    chunk_sz, block_sz = _chunk_block(ctx, n_paths, chunk, block)
    for start in range(0, n_paths, chunk_sz):
        stop = min(start + chunk_sz, n_paths)
        gens = [derive_stream(master_seed, row, i) for i in range(start, stop)]
        P = stop - start
        u_hat = np.tile(u0_hat, (P,) + (1,) * ctx.dim)
        u_vals = _values(u_hat, ctx)
        ent0 = _entropy(u_vals, ctx.dim)
        ent_sum[0] += np.sum(ent0)
        ent_sumsq[0] += np.sum(ent0**2)
        step = 0
        while step < steps:
            B = min(block_sz, steps - step)
            z = _draw_block(gens, B, ctx.draws)
            for b in range(B):
                gu = reg.value(u_vals)
                fisher_integral[start:stop] += ctx.dt * _reg_fisher(gu, ctx)
                neg_integral[start:stop] += ctx.dt * np.mean(
                    np.maximum(-u_vals, 0.0), axis=grid_axes
                )
                coeffs = increments_from_normals(
                    z[:, b], ctx.params.cutoff, ctx.dim, ctx.dt
                )
                dW = _dW(coeffs, ctx)
                s_hat = u_hat + ctx.inv_sqrt_n * _div_noise(gu, dW, ctx)
                gradsq_integral[start:stop] += np.sum(
                    dissip_w * np.abs(s_hat) ** 2, axis=spectral_axes
                )
                u_hat = ctx.mult * s_hat
                u_vals = _values(u_hat, ctx)
                entropy = _entropy(u_vals, ctx.dim)
                ent_sum[step + b + 1] += np.sum(entropy)
                ent_sumsq[step + b + 1] += np.sum(entropy**2)
            step += B
            _guard(u_vals, step, ctx, blowup_limit)
        energy_final[start:stop] = np.mean(u_vals**2, axis=grid_axes)
        neg_mass_final[start:stop] = np.mean(np.maximum(-u_vals, 0.0), axis=grid_axes)
        min_value_final[start:stop] = np.min(u_vals, axis=grid_axes)
        mass_now = u_hat.reshape(P, -1)[:, 0].real
        mass_drift = max(mass_drift, float(np.max(np.abs(mass_now - mass0))))
        if progress is not None:
            progress(stop, n_paths)

    mean_ent = ent_sum / n_paths
    var_ent = np.maximum(ent_sumsq / n_paths - mean_ent**2, 0.0)
    se_ent = np.sqrt(var_ent / max(n_paths - 1, 1))
    return StructureSamples(
        n_paths=n_paths,
        dt=dt,
        times=np.arange(steps + 1) * dt,
        mean_entropy=mean_ent,
        se_entropy=se_ent,
        energy_final=energy_final,
        gradsq_integral=gradsq_integral,
        fisher_integral=fisher_integral,
        neg_integral=neg_integral,
        neg_mass_final=neg_mass_final,
        min_value_final=min_value_final,
        mass_drift=mass_drift,
    )


# -- ordered-pair (comparison) driver ----------------------------------------


@dataclass(frozen=True)
class ComparisonSamples:
    """Ordering-violation statistics for a coupled, initially ordered pair."""

    n_paths: int
    dt: float
    times: np.ndarray
    mean_violation: np.ndarray
    max_violation: np.ndarray
    initial_gap: float


def comparison_paths(
    u_plus0: GridField,
    u_minus0: GridField,
    reg: RegSqrt,
    params: RegParams,
    T: float,
    dt: float,
    master_seed: int,
    row: int,
    n_paths: int,
    chunk: int | None = None,
    block: int | None = None,
    workers: int = 1,
    blowup_limit: float = DEFAULT_BLOWUP_LIMIT,
    progress: ProgressFn | None = None,
) -> ComparisonSamples:
    """Evolve an ordered pair through identical noise and track (u- - u+)^+.

    ``mean_violation[s]`` is the path average of the violated-ordering mass
    integral (u_minus - u_plus)^+ at step s; ``max_violation`` holds each
    path's maximum over the trajectory.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    if u_plus0.spec != u_minus0.spec:
        raise ValueError("pair members must share a grid")
    ctx = _make_ctx(u_plus0.spec, params, T, dt, workers)
    up_hat0 = _prepare_ic(u_plus0, ctx)
    um_hat0 = _prepare_ic(u_minus0, ctx)
    steps = ctx.steps
    grid_axes = tuple(range(-ctx.dim, 0))
    initial_gap = float(np.mean(np.abs(u_plus0.values - u_minus0.values)))

    viol_sum = np.zeros(steps + 1)
    max_violation = np.zeros(n_paths)
    chunk_sz, block_sz = _chunk_block(ctx, n_paths, chunk, block)
    for start in range(0, n_paths, chunk_sz):
        stop = min(start + chunk_sz, n_paths)
        gens = [derive_stream(master_seed, row, i) for i in range(start, stop)]
        P = stop - start
        up_hat = np.tile(up_hat0, (P,) + (1,) * ctx.dim)
        um_hat = np.tile(um_hat0, (P,) + (1,) * ctx.dim)
        up_vals = _values(up_hat, ctx)
        um_vals = _values(um_hat, ctx)
        viol = np.mean(np.maximum(um_vals - up_vals, 0.0), axis=grid_axes)
        viol_sum[0] += np.sum(viol)
        running_max = viol.copy()
        step = 0
        while step < steps:
            B = min(block_sz, steps - step)
            z = _draw_block(gens, B, ctx.draws)
            for b in range(B):
                coeffs = increments_from_normals(
                    z[:, b], ctx.params.cutoff, ctx.dim, ctx.dt
                )
                dW = _dW(coeffs, ctx)
                up_hat = ctx.mult * (
                    up_hat + ctx.inv_sqrt_n * _div_noise(reg.value(up_vals), dW, ctx)
                )
                um_hat = ctx.mult * (
                    um_hat + ctx.inv_sqrt_n * _div_noise(reg.value(um_vals), dW, ctx)
                )
                up_vals = _values(up_hat, ctx)
                um_vals = _values(um_hat, ctx)
                viol = np.mean(np.maximum(um_vals - up_vals, 0.0), axis=grid_axes)
                viol_sum[step + b + 1] += np.sum(viol)
                np.maximum(running_max, viol, out=running_max)
            step += B
            _guard(up_vals, step, ctx, blowup_limit)
            _guard(um_vals, step, ctx, blowup_limit)
        max_violation[start:stop] = running_max
        if progress is not None:
            progress(stop, n_paths)

    return ComparisonSamples(
        n_paths=n_paths,
        dt=dt,
        times=np.arange(steps + 1) * dt,
        mean_violation=viol_sum / n_paths,
        max_violation=max_violation,
        initial_gap=initial_gap,
    )
