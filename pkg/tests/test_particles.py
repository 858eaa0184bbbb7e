"""Particle ensembles, the mollifier, and mollified initial data."""
import numpy as np
import pytest

from dksim.noise import derive_stream
from dksim.particles import (
    Mollifier,
    ParticleEnsemble,
    PRESETS,
    ResolutionError,
    evolve,
    generate_positions,
    load_positions,
    mollified_initial,
    pair_empirical,
    save_positions,
)
from dksim.torus import GridField, GridSpec, coarsen, mass, pairing


def test_ensemble_wraps_and_validates():
    ens = ParticleEnsemble(1, np.array([0.25, 1.25, -0.25]))
    np.testing.assert_allclose(ens.positions[:, 0], [0.25, 0.25, 0.75])
    assert ens.n_particles == 3
    with pytest.raises(ValueError):
        ParticleEnsemble(2, np.zeros((4, 1)))
    with pytest.raises(ValueError):
        ParticleEnsemble(1, np.array([np.nan]))


def test_evolve_heat_kernel_moment():
    """E cos(2 pi X_t) = cos(2 pi x0) exp(-2 pi^2 t) for Brownian motion."""
    t, n = 0.07, 200_000
    x0 = 0.3
    ens = ParticleEnsemble(1, np.full(n, x0))
    moved = evolve(ens, t, derive_stream(314, 0))
    vals = np.cos(2 * np.pi * moved.positions[:, 0])
    target = np.cos(2 * np.pi * x0) * np.exp(-0.5 * (2 * np.pi) ** 2 * t)
    se = np.std(vals, ddof=1) / np.sqrt(n)
    assert abs(np.mean(vals) - target) < 3 * se
    # t = 0 returns the same object, no draws burned
    assert evolve(ens, 0.0, derive_stream(1)) is ens


def test_pair_empirical_grid_field_and_callable():
    spec = GridSpec(1, 32)
    phi = GridField.from_function(spec, lambda x: np.cos(2 * np.pi * x))
    ens = ParticleEnsemble(1, np.array([0.0, 0.25, 0.5]))
    want = (1.0 + 0.0 - 1.0) / 3
    assert pair_empirical(ens, phi) == pytest.approx(want, abs=1e-12)
    assert pair_empirical(ens, lambda x: np.cos(2 * np.pi * x)) == pytest.approx(
        want, abs=1e-14
    )
    with pytest.raises(ValueError):
        pair_empirical(ens, GridField.constant(GridSpec(2, 16), 1.0))


def test_mollifier_kernel_matches_transform():
    """Spectral synthesis of the kernel agrees with the direct periodized sum.

    The kernel is smooth but not band-limited; n = 1024 resolves the spectral
    tail to machine precision for scale 8.
    """
    mol = Mollifier(1, 8)
    spec = GridSpec(1, 1024)
    coeffs = mol.transform_on_grid(spec)
    kernel = np.fft.ifft(coeffs).real * spec.n_points
    direct = mol.kernel_values(spec.axes()[0])
    np.testing.assert_allclose(kernel, direct, atol=1e-12 * mol.sup_value)


def test_mollifier_transform_on_overresolving_grid():
    """A grid far finer than the kernel width still tabulates correctly.

    Past the tabulation lattice's Nyquist (64 profile units) the transform
    is below double precision and comes back as exact zeros; the covered
    range must match the coarse-grid table entry for entry.
    """
    mol = Mollifier(1, 2)
    fine = GridSpec(1, 512)
    coarse = GridSpec(1, 256)
    tab_f = mol.transform_on_grid(fine)
    tab_c = mol.transform_on_grid(coarse)
    kf = fine.wavenumbers()[0]
    kc = coarse.wavenumbers()[0]
    lut = {int(abs(k)): tab_c[i] for i, k in enumerate(kc)}
    for i, k in enumerate(kf):
        j = int(abs(k))
        if j > 128:
            assert tab_f[i] == 0.0
        elif j in lut:
            assert tab_f[i] == lut[j]
    ens = generate_positions("single_site", 4, 1)
    u0 = mollified_initial(ens, mol, fine)
    assert abs(mass(u0) - 1.0) < 1e-12


def test_mollifier_transform_against_quadrature():
    """rho_hat(xi) = int rho(x) cos(2 pi xi x) dx via direct Riemann sum."""
    mol = Mollifier(1, 4)
    spec = GridSpec(1, 64)
    tab = mol.transform_on_grid(spec)
    x = np.linspace(-1, 1, 200_001)
    prof = np.zeros_like(x)
    m = np.abs(x) < 1
    prof[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    prof /= np.trapezoid(prof, x)
    for k in (0, 1, 3, 7):
        want = np.trapezoid(prof * np.cos(2 * np.pi * (k / mol.scale) * x), x)
        assert abs(tab[k] - want) < 1e-9
    assert tab[0] == pytest.approx(1.0, abs=1e-12)


def test_mollified_initial_mass_and_sign():
    rng = derive_stream(21, 0)
    ens = generate_positions("uniform", 100, 1, rng)
    grid = GridSpec(1, 128)
    u0 = mollified_initial(ens, Mollifier(1, 16), grid)
    assert np.all(u0.values >= 0.0)
    assert abs(mass(u0) - 1.0) < 1e-12


def test_mollified_initial_2d():
    rng = derive_stream(22, 0)
    ens = generate_positions("uniform", 50, 2, rng)
    grid = GridSpec(2, 64)
    u0 = mollified_initial(ens, Mollifier(2, 8), grid)
    assert np.all(u0.values >= 0.0)
    assert abs(mass(u0) - 1.0) < 1e-12


def test_mollified_initial_requires_resolution():
    ens = generate_positions("single_site", 10, 1)
    with pytest.raises(ResolutionError):
        mollified_initial(ens, Mollifier(1, 16), GridSpec(1, 64))


def test_mollified_pairing_approximates_empirical():
    """<mollified, phi> -> <empirical, phi> as the mollifier sharpens."""
    rng = derive_stream(5, 1)
    ens = generate_positions("uniform", 200, 1, rng)
    phi_fn = lambda x: np.cos(2 * np.pi * x)
    target = pair_empirical(ens, phi_fn)
    errs = []
    for scale in (8, 16, 32):
        grid = GridSpec(1, 8 * scale)
        u0 = mollified_initial(ens, Mollifier(1, scale), grid)
        phi = GridField.from_function(grid, phi_fn)
        errs.append(abs(pairing(u0, phi) - target))
    assert errs[2] < errs[0]
    assert errs[2] < 1e-3


def test_equispaced_comb_coarsens_to_constant():
    """With the solver band below N, the comb's ripple modes all truncate away."""
    n = 64
    ens = generate_positions("equispaced", n, 1)
    fine = GridSpec(1, 1024)
    u0 = mollified_initial(ens, Mollifier(1, 128), fine)
    solver_grid = GridSpec(1, 32)  # keeps |k| <= 15 < 64
    u = coarsen(u0, solver_grid)
    np.testing.assert_allclose(u.values, 1.0, atol=1e-12)


def test_presets():
    assert set(PRESETS) == {"equispaced", "uniform", "single_site", "clustered"}
    eq = generate_positions("equispaced", 5, 1)
    np.testing.assert_allclose(eq.positions[:, 0], np.arange(5) / 5)
    ss = generate_positions("single_site", 7, 2)
    assert np.all(ss.positions == 0.5)
    sq = generate_positions("equispaced", 9, 2)
    assert sq.n_particles == 9
    with pytest.raises(ValueError, match="square"):
        generate_positions("equispaced", 10, 2)
    with pytest.raises(ValueError, match="rng"):
        generate_positions("uniform", 10, 1)
    with pytest.raises(ValueError, match="unknown preset"):
        generate_positions("grid", 10, 1)
    cl = generate_positions("clustered", 500, 1, derive_stream(0))
    spread = np.std((cl.positions[:, 0] - 0.5 + 0.5) % 1.0 - 0.5)
    assert spread < 0.2  # tight blob around the center


def test_save_load_roundtrip(tmp_path):
    rng = derive_stream(17)
    ens = generate_positions("uniform", 23, 2, rng)
    path = tmp_path / "pos.txt"
    save_positions(path, ens)
    back = load_positions(path, 2)
    np.testing.assert_array_equal(back.positions, ens.positions)
    with pytest.raises(ValueError, match="columns"):
        load_positions(path, 1)
