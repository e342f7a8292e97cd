import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capstab import polar_grid as pg
from capstab.polar_grid import GridField, GridMismatchError, PolarGrid


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        PolarGrid(4, 16)
    with pytest.raises(ValueError):
        PolarGrid(16, 15)


def test_boundary_ring_is_unit_circle_with_uniform_spacing():
    g = PolarGrid(20, 16)
    assert g.r[-1] == 1.0
    np.testing.assert_allclose(np.diff(g.r), g.h_r, rtol=1e-12)


def test_area_weights_sum_to_pi_and_skip_boundary():
    g = PolarGrid(37, 24)
    assert math.fsum(g.area_weights.ravel()) == pytest.approx(math.pi, abs=1e-13)
    assert np.all(g.area_weights[-1] == 0)


@pytest.mark.parametrize("func, lap", [
    (lambda x, y: x**2 + y**2, lambda x, y: 4.0 + 0 * x),
    (lambda x, y: x * y, lambda x, y: 0 * x),
    (lambda x, y: (x**2 - y**2) * (x**2 + y**2), lambda x, y: 12 * (x**2 - y**2)),
])
def test_laplacian_second_order(func, lap):
    errs = []
    for n in (32, 64, 128):
        g = PolarGrid(n, n)
        f = GridField.from_function(g, func)
        exact = lap(g.x, g.y)[:-1]
        errs.append(np.abs(pg.laplacian(f).values[:-1] - exact).max())
    assert errs[-1] < 1e-2
    assert all(a / b > 3.5 for a, b in zip(errs, errs[1:]) if b > 1e-10)


def test_laplacian_matrix_matches_difference_form(rng):
    g = PolarGrid(16, 16)
    v = rng.normal(size=g.shape)
    np.testing.assert_allclose((g.laplacian_matrix @ v.ravel()).reshape(g.nr, -1),
                               pg.laplacian_values(v, g), atol=1e-9)


def test_divergence_theorem_second_order():
    gaps = []
    for n in (32, 64, 128):
        g = PolarGrid(n, n)
        f = GridField.from_function(g, lambda x, y: np.exp(x) * np.cos(2 * y) + x * y**2)
        lap = np.nan_to_num(pg.laplacian(f).values)
        gaps.append(abs(pg.integrate(lap, g) - pg.integrate_boundary(pg.normal_derivative(f), g)))
    assert gaps[-1] < 10 * PolarGrid(128, 128).h ** 2
    assert gaps[0] / gaps[1] > 3 and gaps[1] / gaps[2] > 3


def test_angular_part_sums_to_zero_on_each_ring(rng):
    g = PolarGrid(16, 16)
    ring = np.broadcast_to(rng.normal(size=g.ntheta), g.shape).copy()
    # constant in r: the radial term vanishes and angular differences telescope
    assert abs(pg.laplacian_values(ring, g).sum(axis=1)).max() < 1e-9


def test_normal_derivative_and_boundary_integral():
    g = PolarGrid(64, 64)
    f = GridField.from_function(g, lambda x, y: x**2 + y**2)
    np.testing.assert_allclose(pg.normal_derivative(f), 2.0, atol=1e-10)
    assert pg.integrate_boundary(np.ones(g.ntheta), g) == pytest.approx(2 * math.pi)


def test_gradient_of_linear_function():
    # radial differences are exact for linear data; angular ones carry O(h_theta^2)
    errs = []
    for n in (32, 64):
        g = PolarGrid(n, n)
        f = GridField.from_function(g, lambda x, y: 2 * x - y)
        errs.append(np.abs(pg.gradient_magnitude(f).values - math.sqrt(5)).max())
    assert errs[1] < 5e-3
    assert errs[0] / errs[1] > 3.5


def test_norms():
    g = PolarGrid(64, 64)
    one = GridField.constant(g, 1.0)
    assert pg.lp_norm(one, 1) == pytest.approx(math.pi)
    assert pg.lp_norm(one, 2) == pytest.approx(math.sqrt(math.pi))
    assert pg.lp_norm(one, math.inf) == 1.0
    assert pg.lp_norm(one, 1, "boundary") == pytest.approx(2 * math.pi)
    assert pg.w1p_norm(one, 1) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        pg.lp_norm(one, 0.5)
    radius = GridField.from_function(g, lambda x, y: np.hypot(x, y))
    # ||r||_1 = 2 pi / 3 and ||grad r||_1 = pi
    assert pg.w1p_norm(radius, 1) == pytest.approx(2 * math.pi / 3 + math.pi, rel=2e-2)
    assert pg.restrict_norm(one, 1, 0.5) == pytest.approx(math.pi / 4, rel=0.1)


def test_poisson_radial_solution():
    g = PolarGrid(64, 64)
    w = pg.solve_poisson(GridField.constant(g, 1.0))
    exact = (1 - g.rr**2) / 4
    assert np.abs(w.values - exact).max() < 1e-3


def test_interpolation_fourth_order():
    errs = []
    pts = np.random.default_rng(1).uniform(-0.7, 0.7, (200, 2))
    for n in (16, 32, 64):
        g = PolarGrid(n, n)
        f = GridField.from_function(g, lambda x, y: np.sin(2 * x) * np.exp(y))
        approx = pg.interpolate(f, pts[:, 0], pts[:, 1])
        errs.append(np.abs(approx - np.sin(2 * pts[:, 0]) * np.exp(pts[:, 1])).max())
    assert errs[1] / errs[2] > 8


def test_interpolation_reproduces_nodes_and_rejects_outside():
    g = PolarGrid(16, 16)
    f = GridField.from_function(g, lambda x, y: np.cos(x + 2 * y))
    np.testing.assert_allclose(pg.interpolate(f, g.x, g.y), f.values, atol=1e-12)
    with pytest.raises(ValueError):
        pg.interpolate(f, 1.1, 0.0)


def test_field_arithmetic_and_grid_mismatch():
    a = GridField.constant(PolarGrid(8, 8), 1.0)
    b = GridField.constant(PolarGrid(8, 8), 2.0)
    assert np.all((a + b).values == 3) and np.all((b - a).values == 1)
    assert np.all((a * 3).values == 3) and np.all((-a).values == -1)
    with pytest.raises(GridMismatchError):
        a + GridField.constant(PolarGrid(9, 8), 1.0)
    with pytest.raises(ValueError):
        a.values[0, 0] = 5


@settings(max_examples=20, deadline=None)
@given(st.integers(8, 20), st.integers(4, 12))
def test_json_round_trip(nr, half_nt):
    g = PolarGrid(nr, 2 * half_nt)
    f = GridField(g, np.random.default_rng(nr).normal(size=g.shape))
    back = GridField.from_json(f.to_json())
    assert back.grid == g
    np.testing.assert_array_equal(back.values, f.values)
