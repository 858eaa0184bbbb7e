"""Square-root regularizer shape and the coercivity bookkeeping."""
import math

import numpy as np
import pytest

from dksim.regularization import (
    DECAY_CONSTANT,
    GROWTH_CONSTANT,
    LIPSCHITZ_CONSTANT,
    SQUARE_DEFECT_CONSTANT,
    CoercivityViolation,
    RegParams,
    RegSqrt,
    check_coercivity,
    select_parameters,
)

DELTAS = (1e-4, 1e-3, 1e-2, 1e-1)


@pytest.mark.parametrize("delta", DELTAS)
def test_c1_joints(delta):
    """Value and slope match across both piece boundaries."""
    f = RegSqrt(delta)
    h = delta * 1e-9
    for joint in (delta / 2, delta):
        left = (f.value(joint) - f.value(joint - h)) / h
        right = (f.value(joint + h) - f.value(joint)) / h
        assert abs(f.derivative(joint - h / 2) - left) < 1e-4 * f.derivative(0.0)
        assert abs(f.derivative(joint + h / 2) - right) < 1e-4 * f.derivative(0.0)
    # exact joint residuals, evaluated piecewise by nudging across the seam
    eps = np.nextafter(delta / 2, 0.0), np.nextafter(delta / 2, np.inf)
    assert abs(f.value(eps[0]) - f.value(eps[1])) < 1e-12
    assert abs(f.derivative(eps[0]) - f.derivative(eps[1])) < 1e-9 / math.sqrt(delta)
    eps = np.nextafter(delta, 0.0), np.nextafter(delta, np.inf)
    assert abs(f.value(eps[0]) - f.value(eps[1])) < 1e-12
    assert abs(f.derivative(eps[0]) - f.derivative(eps[1])) < 1e-9 / math.sqrt(delta)


@pytest.mark.parametrize("delta", DELTAS)
def test_matches_sqrt_beyond_delta(delta):
    f = RegSqrt(delta)
    x = np.linspace(np.nextafter(delta, np.inf), 10.0, 1000)
    np.testing.assert_array_equal(f.value(x), np.sqrt(x))
    # x = delta itself sits on the cubic piece; equal up to roundoff only
    assert abs(f.value(delta) - math.sqrt(delta)) < 1e-12


@pytest.mark.parametrize("delta", DELTAS)
def test_linear_near_zero(delta):
    f = RegSqrt(delta)
    x = np.linspace(0.0, delta / 2, 200)
    np.testing.assert_allclose(f.value(x), x / math.sqrt(delta), atol=1e-15)


def test_odd():
    f = RegSqrt(1e-2)
    x = np.linspace(-3, 3, 5001)
    np.testing.assert_array_equal(f.value(-x), -np.asarray(f.value(x)))
    np.testing.assert_array_equal(f.derivative(-x), f.derivative(x))
    assert f.value(0.0) == 0.0


@pytest.mark.parametrize("delta", DELTAS)
def test_derivative_bounds(delta):
    """|f'(x)| <= min(C_lip / sqrt(delta), C_dec / sqrt(x)) on x > 0."""
    f = RegSqrt(delta)
    rng = np.random.default_rng(11)
    x = np.concatenate([
        rng.uniform(0, 2 * delta, 4000),
        rng.uniform(0, 10, 4000),
        np.linspace(1e-12, 3 * delta, 2000),
    ])
    d = np.abs(np.asarray(f.derivative(x)))
    assert np.all(d <= LIPSCHITZ_CONSTANT / math.sqrt(delta) + 1e-12)
    pos = x > 0
    assert np.all(d[pos] <= DECAY_CONSTANT / np.sqrt(x[pos]) + 1e-12)


def test_lipschitz_bound_is_attained():
    """The 7/6 constant is sharp: the cubic's slope peaks at 2 delta / 3."""
    delta = 1e-2
    f = RegSqrt(delta)
    peak = f.derivative(2 * delta / 3)
    assert abs(peak - LIPSCHITZ_CONSTANT / math.sqrt(delta)) < 1e-9 / math.sqrt(delta)


@pytest.mark.parametrize("delta", DELTAS)
def test_square_defect(delta):
    """|f(x)^2 - x| <= C_sq * delta for x >= 0, with equality at x = delta/2."""
    f = RegSqrt(delta)
    x = np.linspace(0, 4 * delta, 20001)
    defect = np.abs(np.asarray(f.value(x)) ** 2 - x)
    assert np.max(defect) <= SQUARE_DEFECT_CONSTANT * delta + 1e-15
    assert abs(f.value(delta / 2) ** 2 - delta / 2) > 0.99 * SQUARE_DEFECT_CONSTANT * delta


def test_derivative_matches_finite_difference():
    delta = 0.05
    f = RegSqrt(delta)
    x = np.linspace(0.001, 0.3, 500)
    h = 1e-7
    fd = (np.asarray(f.value(x + h)) - np.asarray(f.value(x - h))) / (2 * h)
    np.testing.assert_allclose(f.derivative(x), fd, atol=1e-5, rtol=1e-6)


def test_growth_constant_is_lipschitz_squared():
    f = RegSqrt(0.3)
    assert f.growth_constant == pytest.approx(LIPSCHITZ_CONSTANT**2)
    assert GROWTH_CONSTANT == 1.0


def test_reg_requires_positive_delta():
    with pytest.raises(ValueError):
        RegSqrt(0.0)
    with pytest.raises(ValueError):
        RegSqrt(-1e-3)


# -- coercivity --------------------------------------------------------------


def test_check_coercivity_accepts_safe_point():
    params = check_coercivity(100, 0.5, 2, dim=1, c_growth=1.0)
    assert isinstance(params, RegParams)
    assert params.ratio == pytest.approx(0.1)
    assert params.mode_count == 5


def test_check_coercivity_rejects_unsafe_point():
    with pytest.raises(CoercivityViolation) as exc:
        check_coercivity(100, 0.01, 10, dim=1, c_growth=1.0)
    assert exc.value.ratio == pytest.approx(21.0)


def test_check_coercivity_default_growth():
    # default growth constant is the squared Lipschitz bound
    params = check_coercivity(1000, 0.5, 2, dim=1)
    assert params.ratio == pytest.approx((7 / 6) ** 2 * 5 / (1000 * 0.5))


def test_ratio_scales_with_mode_count_dim2():
    p1 = check_coercivity(10_000, 0.25, 3, dim=1, c_growth=1.0)
    p2 = check_coercivity(10_000, 0.25, 3, dim=2, c_growth=1.0)
    assert p2.ratio == pytest.approx(p1.ratio * 7)
    assert p2.mode_count == 49


def test_margins():
    params = check_coercivity(100, 0.5, 2, dim=1, c_growth=1.0)
    assert params.energy_margin == pytest.approx(0.9)
    assert params.entropy_margin == pytest.approx(0.225)


@pytest.mark.parametrize("n,dim", [(50, 1), (200, 1), (5000, 1), (50, 2), (2000, 2)])
def test_select_parameters_respects_safety(n, dim):
    for safety in (0.25, 0.5, 0.9):
        params = select_parameters(n, dim=dim, safety=safety)
        assert params.ratio <= safety
        assert params.cutoff == math.ceil(params.delta**-0.5)
        # delta is a power-of-two multiple of the reference scale
        ref = n ** (-1.0 / (dim / 2 + 1))
        j = math.log2(params.delta / ref)
        assert abs(j - round(j)) < 1e-9


def test_select_parameters_prefers_smallest_delta():
    """Halving delta must break the safety bound, else it would have been chosen."""
    params = select_parameters(500, dim=1, safety=0.5)
    ref = 500 ** (-1.0 / 1.5)
    smaller = params.delta / 2
    cutoff = math.ceil(smaller**-0.5)
    ratio = params.c_growth * (2 * cutoff + 1) / (500 * smaller)
    assert ratio > 0.5


def test_select_parameters_rejects_bad_inputs():
    with pytest.raises(ValueError):
        select_parameters(0, dim=1)
    with pytest.raises(ValueError):
        select_parameters(100, dim=3)
    with pytest.raises(ValueError):
        select_parameters(100, dim=1, safety=1.5)
