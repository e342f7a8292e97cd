import math

import numpy as np
import pytest
from scipy.integrate import quad

from capstab.conformal_metric import ConformalFactor, boundary_length, eta_family
from capstab.geodesy import (DistanceMatrix, ball_volume, default_n_cart, diameter,
                             distance_matrix, farthest_point_indices, geodesic_graph, inradius,
                             metrication_constant, volume_comparison_check)
from capstab.liouville import solve_comparison
from capstab.model_cap import inradius_lower_bound, model_factor, model_factor_values
from capstab.polar_grid import GridField, PolarGrid

from conftest import SWEEP


def radial_distance(c, r):
    return quad(lambda t: math.exp(model_factor_values(c, t, 0.0)), 0, r, epsabs=1e-13)[0]


def test_metrication_constants():
    assert metrication_constant(2) == pytest.approx(0.0275, abs=1e-4)
    assert metrication_constant(3) < metrication_constant(2) < metrication_constant(1)


def test_flat_distances_along_ray(flat64):
    g = geodesic_graph(flat64)
    o = g.vertex_at(0.0, 0.0)
    row = g.distances_from(o)[0]
    for r in (0.25, 0.5, 0.75, 1.0):
        v = g.vertex_at(r, 0.0)
        true = float(np.hypot(*g.xy[v]))
        assert true - 1e-9 <= row[v] <= true + g.slack_for(row[v])


@pytest.mark.parametrize("c, expected", [(0.0, math.pi / 2), (1.0, math.pi / 4)])
def test_centre_to_boundary(grid64, c, expected):
    u = ConformalFactor(model_factor(c, grid64), c)
    g = geodesic_graph(u)
    assert radial_distance(c, 1.0) == pytest.approx(expected, abs=1e-12)
    d = g.distances_from(g.vertex_at(0.0, 0.0))[0][g.boundary_nodes]
    assert np.all(d >= expected - 1e-8)
    assert np.all(d <= expected + g.slack_for(expected))


def test_graph_never_undershoots_flat(flat64, rng):
    g = geodesic_graph(flat64)
    src = rng.integers(0, g.n_vertices, size=10)
    rows = g.distances_from(src)
    true = np.hypot(g.xy[None, :, 0] - g.xy[src, None, 0], g.xy[None, :, 1] - g.xy[src, None, 1])
    assert np.all(rows >= true - 1e-9)
    assert np.all(rows <= true + g.c_graph * true + g.additive_slack)


def test_metrication_on_lattice_pairs(flat64, rng):
    g = geodesic_graph(flat64)
    lattice = np.arange(g.n_polar, g.n_vertices)
    pairs = rng.choice(lattice, size=(200, 2))
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    rel = []
    for a, b in pairs:
        d = g.distances_from(a)[0, b]
        t = float(np.hypot(*(g.xy[a] - g.xy[b])))
        rel.append(d / t - 1)
    assert max(rel) <= g.c_graph + 1e-3
    assert min(rel) >= -1e-9


@pytest.mark.parametrize("c, expected", [(1.0, math.pi / 4), (None, 1.0)])
def test_inradius(grid64, flat64, c, expected):
    u = flat64 if c is None else ConformalFactor(model_factor(c, grid64), c)
    g = geodesic_graph(u)
    value, node = inradius(u, g)
    assert expected - 3 * g.additive_slack <= value <= expected + g.slack_for(expected)
    assert node < grid64.n_interior


def test_inradius_of_comparison_factor(grid64):
    u = eta_family(1.0, 0.1, grid64)
    v = solve_comparison(u).v
    g = geodesic_graph(v)
    value, _ = inradius(v, g)
    bound = inradius_lower_bound(1.0, boundary_length(v))
    assert value >= bound - g.slack_for(value)


def test_diameter(flat64, rho0_64):
    g = geodesic_graph(flat64)
    assert 2.0 - 1e-6 <= diameter(flat64, 64, g) <= 2.0 + g.slack_for(2.0)
    g0 = geodesic_graph(rho0_64)
    d = diameter(rho0_64, 64, g0)
    # a 64-point sample sees the diameter only up to twice its covering radius
    cover = farthest_point_indices(g0, 64)[3]
    assert math.pi - 2 * cover <= d <= math.pi + g0.slack_for(math.pi)
    assert diameter(rho0_64, 512, g0) >= math.pi - 1e-6


def test_distance_matrix_invariants(rho1_64, rng):
    g = geodesic_graph(rho1_64)
    sample = rng.choice(g.n_polar, size=30, replace=False)
    dm = distance_matrix(rho1_64, sample, g)
    d = dm.d
    np.testing.assert_array_equal(d, d.T)
    assert np.all(np.diag(d) == 0)
    viol = d[:, None, :] - d[:, :, None] - d[None, :, :]
    assert viol.max() <= 1e-9
    diam = diameter(rho1_64, 64, g)
    assert d.max() <= diam + dm.slack
    back = DistanceMatrix.from_dict(dm.to_dict())
    np.testing.assert_array_equal(back.d, d)
    np.testing.assert_array_equal(back.indices, sample)
    assert back.slack == dm.slack


def test_distance_matrix_errors(rho1_64):
    with pytest.raises(ValueError):
        distance_matrix(rho1_64, [])


def test_farthest_point_indices(rho1_64):
    g = geodesic_graph(rho1_64)
    a = farthest_point_indices(g, 16)
    b = farthest_point_indices(g, 16)
    np.testing.assert_array_equal(a[0], b[0])
    assert len(set(a[0].tolist())) == 16
    assert np.all(np.diff(a[2][1:]) <= 1e-12)  # insertion distances do not grow
    with pytest.raises(ValueError):
        farthest_point_indices(g, 0)


def test_ball_volumes(flat64, rho0_64):
    g = geodesic_graph(flat64)
    o = g.vertex_at(0.0, 0.0)
    h = flat64.grid.h
    assert ball_volume(flat64, o, 0.5, g) == pytest.approx(math.pi * 0.25, abs=4 * (h + g.additive_slack))
    g0 = geodesic_graph(rho0_64)
    vol = ball_volume(rho0_64, g0.vertex_at(0.0, 0.0), math.pi / 2, g0)
    assert vol == pytest.approx(2 * math.pi, abs=8 * (h + g0.additive_slack))
    small = ball_volume(rho0_64, g0.vertex_at(0.0, 0.0), 0.5, g0)
    assert small == pytest.approx(2 * math.pi * (1 - math.cos(0.5)), abs=8 * (h + g0.additive_slack))
    with pytest.raises(ValueError):
        ball_volume(flat64, o, math.pi)
    with pytest.raises(ValueError):
        ball_volume(flat64, o, 0.0)


def test_volume_comparison_identical(rho1_64):
    rep = volume_comparison_check(rho1_64, 1.0, [0, 100, 1000], [0.2, 0.5])
    assert all(abs(r["margin"]) <= 1e-12 for r in rep)


def test_volume_comparison_eta_family(grid64, rng):
    u = eta_family(1.0, 0.3, grid64)
    centers = rng.choice(grid64.n_interior, size=5, replace=False)
    rep = volume_comparison_check(u, 1.0, centers, [0.2, 0.5])
    assert len(rep) == 10
    assert max(r["margin"] for r in rep) <= 0.02


def _physical_sample(n=32, seed=7):
    rng = np.random.default_rng(seed)
    r = 0.9 * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * math.pi, size=n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


def test_refinement_convergence():
    pts = _physical_sample()
    mats = []
    for n in (32, 64, 128):
        u = eta_family(1.0, 0.2, PolarGrid(n, n))
        g = geodesic_graph(u)
        idx = [g.vertex_at(x, y) for x, y in pts]
        mats.append(distance_matrix(u, idx, g).d)
    diffs = [np.max(np.abs(b - a)) for a, b in zip(mats, mats[1:])]
    assert diffs[0] / diffs[1] >= 1.5


def test_eta_sweep_approaches_model(sweep64, grid64):
    model = ConformalFactor(model_factor(1.0, grid64), 1.0)
    gm = geodesic_graph(model)
    pts = _physical_sample()
    idx = [gm.vertex_at(x, y) for x, y in pts]
    dm = distance_matrix(model, idx, gm).d
    devs = [np.max(np.abs(distance_matrix(sol.v, idx).d - dm)) for _, _, sol in sweep64]
    assert all(b <= 1.1 * a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 0.05 * devs[0]


def test_default_n_cart():
    assert default_n_cart(PolarGrid(64, 64)) == 64
    assert default_n_cart(PolarGrid(256, 256)) == 128


def test_model_cap_diameter(rho1_64):
    # antipodal boundary points of a cap of radius pi/4 are pi/2 apart
    g = geodesic_graph(rho1_64)
    d = diameter(rho1_64, 256, g)
    cover = farthest_point_indices(g, 256)[3]
    assert math.pi / 2 - 2 * cover <= d <= math.pi / 2 + g.slack_for(math.pi / 2)
