"""Band-limited noise: layout, normalization, assembly, calibration."""
import numpy as np
import pytest

from dksim.noise import (
    NoiseIncrement,
    derive_stream,
    draws_per_step,
    gradient_sq_sum,
    half_modes,
    increment_field,
    increments_from_normals,
    mode_box,
    noise_term,
    sample_increment,
)
from dksim.regularization import RegSqrt, check_coercivity
from dksim.torus import GridField, GridSpec, pairing


def test_mode_box_and_half_lattice():
    box = mode_box(2, 1)
    assert box.shape == (5, 1)
    assert box.min() == -2 and box.max() == 2
    half = half_modes(2, 1)
    assert half.tolist() == [[1], [2]]
    box2 = mode_box(1, 2)
    assert box2.shape == (9, 2)
    half2 = half_modes(1, 2)
    # first nonzero component positive: (0,1), (1,-1), (1,0), (1,1)
    assert half2.shape == (4, 2)
    for k in half2:
        nz = k[np.nonzero(k)[0][0]]
        assert nz > 0


def test_draws_per_step_counts():
    assert draws_per_step(2, 1) == 1 + 2 * 1 * 2  # dB^0 plus Re/Im per half mode
    assert draws_per_step(1, 2) == 2 + 2 * 2 * 4
    assert draws_per_step(0, 1) == 1


def test_increment_mirroring():
    rng = derive_stream(123, 0)
    inc = sample_increment(3, 1, 0.01, rng)
    for k in range(1, 4):
        np.testing.assert_array_equal(inc.mode((-k,)), np.conj(inc.mode((k,))))
    assert np.all(inc.mode((0,)).imag == 0.0)
    with pytest.raises(ValueError):
        inc.mode((4,))


def test_increment_normalization():
    """E|dB^k|^2 = dt off zero; Var dB^0 = dt; components independent."""
    dt, m = 0.3, 40_000
    rng = np.random.default_rng(77)
    z = rng.standard_normal((m, draws_per_step(1, 1)))
    coeffs = increments_from_normals(z, 1, 1, dt)
    b0 = coeffs[:, 1, 0]  # k = 0 slot
    b1 = coeffs[:, 2, 0]  # k = +1 slot
    assert abs(np.var(b0.real) - dt) < 3 * dt * np.sqrt(2 / m)
    assert np.all(b0.imag == 0)
    sq = np.abs(b1) ** 2  # exponential(dt): sd = dt
    assert abs(np.mean(sq) - dt) < 3 * dt / np.sqrt(m)
    assert abs(np.var(b1.real) - dt / 2) < 3 * (dt / 2) * np.sqrt(2 / m)
    assert abs(np.cov(b1.real, b1.imag)[0, 1]) < 3 * (dt / 2) / np.sqrt(m)


def test_zero_dt_consumes_no_draws():
    rng_a = derive_stream(9, 4)
    rng_b = derive_stream(9, 4)
    inc = sample_increment(2, 1, 0.0, rng_a)
    assert np.all(inc.coeffs == 0)
    np.testing.assert_array_equal(
        rng_a.standard_normal(8), rng_b.standard_normal(8)
    )


def test_increments_batch_matches_rowwise():
    rng = np.random.default_rng(5)
    z = rng.standard_normal((7, draws_per_step(2, 2)))
    batch = increments_from_normals(z, 2, 2, 0.05)
    for i in range(7):
        row = increments_from_normals(z[i], 2, 2, 0.05)
        np.testing.assert_array_equal(batch[i], row)


def test_increment_field_real_and_band_limited():
    spec = GridSpec(1, 32)
    rng = derive_stream(1, 2, 3)
    inc = sample_increment(3, 1, 0.1, rng)
    field = increment_field(inc.coeffs, 3, 1, spec)
    assert field.shape == (32, 1)
    f = GridField(spec, field[:, 0])
    for k in range(4, 16):
        assert abs(f.mode((k,))) < 1e-13
    np.testing.assert_allclose(f.mode((2,)), inc.mode((2,))[0], atol=1e-13)


def test_increment_field_rejects_coarse_grid():
    rng = derive_stream(0, 0)
    inc = sample_increment(3, 1, 0.1, rng)
    with pytest.raises(ValueError, match="too coarse"):
        increment_field(inc.coeffs, 3, 1, GridSpec(1, 8))


def _setup_term(n=64, cutoff=2, n_particles=400, delta=0.25, dim=1):
    params = check_coercivity(n_particles, delta, cutoff, dim=dim)
    reg = RegSqrt(delta)
    spec = GridSpec(dim, n)
    return spec, reg, params


def test_noise_term_conserves_mass_exactly():
    spec, reg, params = _setup_term()
    u = GridField.from_function(spec, lambda x: 1.0 + 0.4 * np.cos(2 * np.pi * x))
    rng = derive_stream(3, 1)
    for _ in range(5):
        inc = sample_increment(params.cutoff, 1, 0.01, rng)
        term = noise_term(u, reg, params, inc)
        assert term.mode((0,)) == 0.0


def test_noise_term_is_dealiased():
    spec, reg, params = _setup_term(n=32)
    u = GridField.from_function(spec, lambda x: 1.0 + 0.4 * np.cos(2 * np.pi * 3 * x))
    inc = sample_increment(params.cutoff, 1, 0.01, derive_stream(8))
    term = noise_term(u, reg, params, inc)
    band = spec.dealias_band
    for k in range(band + 1, spec.n // 2):
        assert term.mode((k,)) == 0.0


def test_noise_term_validates_inputs():
    spec, reg, params = _setup_term(n=64, cutoff=2)
    u = GridField.constant(spec, 1.0)
    inc = sample_increment(3, 1, 0.01, derive_stream(0))  # wrong cutoff
    with pytest.raises(ValueError, match="cutoff"):
        noise_term(u, reg, params, inc)
    tiny = GridField.constant(GridSpec(1, 8), 1.0)
    inc2 = sample_increment(2, 1, 0.01, derive_stream(0))
    with pytest.raises(ValueError, match="under-resolves"):
        noise_term(tiny, reg, params, inc2)


def test_noise_term_quadratic_variation():
    """Var <div(f(u) dW)/sqrt(N), phi> = (dt/N) sum_k |<f(u) e_k, grad phi>|^2.

    For u = 1 and phi = cos(2 pi x) the sum is 2 pi^2 (modes k = 1 and -1).
    """
    spec, reg, params = _setup_term(n=32, cutoff=1, n_particles=50, delta=0.5)
    u = GridField.constant(spec, 1.0)
    phi = GridField.from_function(spec, lambda x: np.cos(2 * np.pi * x))
    dt, m = 0.02, 4000
    rng = derive_stream(2024, 1)
    samples = np.empty(m)
    for i in range(m):
        inc = sample_increment(1, 1, dt, rng)
        samples[i] = pairing(noise_term(u, reg, params, inc), phi)
    target = dt * 2 * np.pi**2 / params.n_particles
    tol = 3 * target * np.sqrt(2 / m)
    assert abs(np.mean(samples)) < 3 * np.sqrt(target / m)
    assert abs(np.mean(samples**2) - target) < tol


def test_gradient_sq_sum_brute_force():
    expected = sum(
        (2 * np.pi) ** 2 * k**2 for k in range(-3, 4)
    )
    assert gradient_sq_sum(3, 1) == pytest.approx(expected)
    expected2 = sum(
        (2 * np.pi) ** 2 * (kx**2 + ky**2)
        for kx in range(-2, 3)
        for ky in range(-2, 3)
    )
    assert gradient_sq_sum(2, 2) == pytest.approx(expected2)


def test_derive_stream_determinism():
    a = derive_stream(42, 3, 7).standard_normal(5)
    b = derive_stream(42, 3, 7).standard_normal(5)
    np.testing.assert_array_equal(a, b)
    c = derive_stream(42, 7, 3).standard_normal(5)
    d = derive_stream(43, 3, 7).standard_normal(5)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
