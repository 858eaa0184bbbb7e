"""Spectral grid layer: transforms, calculus, interpolation, restriction."""
import numpy as np
import pytest

from dksim.torus import (
    GridField,
    GridSpec,
    coarsen,
    dealias,
    evaluate_at,
    gradient,
    heat_semigroup,
    mass,
    pairing,
)


def _random_band_limited(spec: GridSpec, band: int, rng) -> GridField:
    """Real field with iid coefficients on |k|_inf <= band (conjugate pairs)."""
    vals = np.zeros(spec.shape)
    mesh = spec.meshgrid()
    for _ in range(6):
        k = rng.integers(-band, band + 1, size=spec.dim)
        amp, phase = rng.normal(), rng.uniform(0, 2 * np.pi)
        arg = sum(2 * np.pi * int(ki) * m for ki, m in zip(k, mesh))
        vals += amp * np.cos(arg + phase)
    return GridField(spec, vals)


def test_spec_shape_and_band():
    spec = GridSpec(2, 64)
    assert spec.shape == (64, 64)
    assert spec.n_points == 4096
    assert spec.dealias_band == 21  # (n - 1) // 3


def test_spec_rejects_bad_sizes():
    with pytest.raises(ValueError):
        GridSpec(1, 0)
    with pytest.raises(ValueError):
        GridSpec(3, 64)
    with pytest.raises(ValueError):
        GridSpec(1, 7)  # odd


def test_roundtrip_spectrum_values():
    rng = np.random.default_rng(0)
    spec = GridSpec(1, 64)
    f = GridField(spec, rng.normal(size=spec.shape))
    g = GridField.from_spectrum(spec, f.spectrum)
    np.testing.assert_allclose(g.values, f.values, atol=1e-12)


def test_from_spectrum_rejects_asymmetric():
    spec = GridSpec(1, 16)
    coeffs = np.zeros(16, dtype=complex)
    coeffs[1] = 1.0  # no conjugate partner at -1
    with pytest.raises(ValueError):
        GridField.from_spectrum(spec, coeffs)


def test_pairing_is_parseval():
    """Grid-mean inner product equals the spectral coefficient sum."""
    rng = np.random.default_rng(1)
    for dim, n in ((1, 32), (2, 16)):
        spec = GridSpec(dim, n)
        f = GridField(spec, rng.normal(size=spec.shape))
        g = GridField(spec, rng.normal(size=spec.shape))
        direct = float(np.mean(f.values * g.values))
        spectral = float(np.sum(f.spectrum * np.conj(g.spectrum)).real)
        assert abs(direct - pairing(f, g)) < 1e-12
        assert abs(spectral - pairing(f, g)) < 1e-12


def test_mass_is_mean_and_zero_mode():
    spec = GridSpec(1, 32)
    f = GridField.from_function(spec, lambda x: 1.0 + 0.3 * np.cos(2 * np.pi * x))
    assert abs(mass(f) - 1.0) < 1e-14
    assert abs(f.spectrum.reshape(-1)[0].real - 1.0) < 1e-14


@pytest.mark.parametrize("k", [1, 2, 5])
def test_gradient_matches_analytic(k):
    spec = GridSpec(1, 64)
    f = GridField.from_function(spec, lambda x: np.cos(2 * np.pi * k * x))
    (df,) = gradient(f)
    x = spec.axes()[0]
    np.testing.assert_allclose(
        df.values, -2 * np.pi * k * np.sin(2 * np.pi * k * x), atol=1e-10
    )


def test_gradient_matches_finite_difference():
    """Central differences of the trig interpolant agree with the spectral gradient."""
    rng = np.random.default_rng(2)
    spec = GridSpec(1, 32)
    f = _random_band_limited(spec, 9, rng)
    (df,) = gradient(f)
    pts = rng.uniform(0, 1, size=40)
    h = 1e-6
    fd = (evaluate_at(f, pts + h) - evaluate_at(f, pts - h)) / (2 * h)
    np.testing.assert_allclose(evaluate_at(df, pts), fd, atol=1e-4, rtol=1e-5)


def test_gradient_2d_mixed_mode():
    spec = GridSpec(2, 32)
    f = GridField.from_function(
        spec, lambda x, y: np.sin(2 * np.pi * (2 * x - y))
    )
    dx, dy = gradient(f)
    xs, ys = np.meshgrid(*spec.axes(), indexing="ij")
    np.testing.assert_allclose(
        dx.values, 4 * np.pi * np.cos(2 * np.pi * (2 * xs - ys)), atol=1e-10
    )
    np.testing.assert_allclose(
        dy.values, -2 * np.pi * np.cos(2 * np.pi * (2 * xs - ys)), atol=1e-10
    )


def test_heat_semigroup_mode_decay():
    """Mode k decays by exp(-|2 pi k|^2 t / 2): generator is Laplacian/2."""
    spec = GridSpec(1, 64)
    t = 0.1
    f = GridField.from_function(spec, lambda x: np.cos(2 * np.pi * x))
    g = heat_semigroup(f, t)
    expected = np.exp(-0.5 * (2 * np.pi) ** 2 * t)
    np.testing.assert_allclose(g.values, expected * f.values, atol=1e-14)


def test_heat_semigroup_properties():
    rng = np.random.default_rng(3)
    spec = GridSpec(2, 16)
    f = _random_band_limited(spec, 5, rng)
    # identity at t = 0, composition, mass conservation
    np.testing.assert_allclose(heat_semigroup(f, 0.0).values, f.values, atol=1e-14)
    a = heat_semigroup(heat_semigroup(f, 0.02), 0.03)
    b = heat_semigroup(f, 0.05)
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)
    assert abs(mass(heat_semigroup(f, 0.4)) - mass(f)) < 1e-14


def test_dealias_removes_high_band():
    spec = GridSpec(1, 32)  # band = 10
    f = GridField.from_function(
        spec, lambda x: np.cos(2 * np.pi * 3 * x) + np.cos(2 * np.pi * 14 * x)
    )
    g = dealias(f)
    low = GridField.from_function(spec, lambda x: np.cos(2 * np.pi * 3 * x))
    np.testing.assert_allclose(g.values, low.values, atol=1e-12)


def test_evaluate_at_exact_for_band_limited():
    rng = np.random.default_rng(4)
    spec = GridSpec(1, 32)
    k, amp, phase = 4, 1.3, 0.7
    f = GridField.from_function(spec, lambda x: amp * np.cos(2 * np.pi * k * x + phase))
    pts = rng.uniform(0, 3, size=25)  # beyond [0,1): wraps
    np.testing.assert_allclose(
        evaluate_at(f, pts), amp * np.cos(2 * np.pi * k * pts + phase), atol=1e-12
    )


def test_evaluate_at_2d():
    spec = GridSpec(2, 16)
    f = GridField.from_function(
        spec, lambda x, y: np.cos(2 * np.pi * x) * np.sin(2 * np.pi * 2 * y)
    )
    rng = np.random.default_rng(5)
    pts = rng.uniform(0, 1, size=(20, 2))
    expected = np.cos(2 * np.pi * pts[:, 0]) * np.sin(2 * np.pi * 2 * pts[:, 1])
    np.testing.assert_allclose(evaluate_at(f, pts), expected, atol=1e-12)


def test_coarsen_preserves_low_modes_exactly():
    rng = np.random.default_rng(6)
    fine = GridSpec(1, 128)
    coarse = GridSpec(1, 32)
    f = _random_band_limited(fine, 40, rng)
    g = coarsen(f, coarse)
    # kept modes copied bitwise; mass only through an inverse transform
    for k in range(-(coarse.n // 2 - 1), coarse.n // 2):
        assert g.mode((k,)) == f.mode((k,))
    assert abs(mass(g) - mass(f)) < 1e-15


def test_coarsen_preserves_band_limited_pairing():
    rng = np.random.default_rng(7)
    fine = GridSpec(2, 64)
    coarse = GridSpec(2, 16)
    f = _random_band_limited(fine, 30, rng)
    g = coarsen(f, coarse)
    phi_f = GridField.from_function(fine, lambda x, y: np.cos(2 * np.pi * (x + y)))
    phi_c = GridField.from_function(coarse, lambda x, y: np.cos(2 * np.pi * (x + y)))
    assert abs(pairing(f, phi_f) - pairing(g, phi_c)) < 1e-12


def test_coarsen_requires_matching_dim_and_smaller_grid():
    f = GridField.constant(GridSpec(1, 32), 1.0)
    with pytest.raises(ValueError):
        coarsen(f, GridSpec(2, 16))
    with pytest.raises(ValueError):
        coarsen(f, GridSpec(1, 64))
