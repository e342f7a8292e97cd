import json
import math

import numpy as np
import pytest

from capstab import polar_grid as pg
from capstab.conformal_metric import ConformalFactor
from capstab.liouville import (SolverError, monotone_iteration, radial_shooting, report_json,
                               solve_comparison, verify_robin)
from capstab.model_cap import model_factor
from capstab.polar_grid import GridField, PolarGrid


def test_model_is_its_own_comparison(rho1_64):
    sol = solve_comparison(rho1_64)
    h2 = rho1_64.grid.h**2
    assert np.max(np.abs(sol.v.values - rho1_64.values)) <= 5 * h2
    assert sol.newton_iters <= 5
    rob = verify_robin(sol, rho1_64)
    assert abs(rob.robin_margin) <= 10 * h2


def test_recovery_second_order():
    errs = []
    for n in (16, 32, 64):
        g = PolarGrid(n, n)
        u = ConformalFactor(model_factor(1.0, g), 1.0)
        errs.append(np.max(np.abs(solve_comparison(u).v.values - u.values)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_boundary_copied_exactly(sweep64):
    for _, u, sol in sweep64:
        np.testing.assert_array_equal(sol.v.field.boundary, u.field.boundary)


def test_eta_family_solutions(sweep64):
    for _, u, sol in sweep64:
        h2 = u.grid.h**2
        assert sol.residual_inf <= 1e-10
        assert sol.ordering_margin >= -10 * h2
        rob = verify_robin(sol, u)
        assert rob.robin_margin >= -10 * h2
        assert rob.max_dn_w <= 10 * h2


def test_residual_is_certified(sweep64):
    _, u, sol = sweep64[1]
    v = sol.v.field
    ev = np.exp(2 * v.values[:-1])
    r = np.max(np.abs(pg.laplacian(v).values[:-1] + ev)) / (1 + ev.max())
    assert r <= 1e-10


def test_constant_data_matches_shooting():
    # the flat value 0 sits at the fold; -0.1 is on the regular small branch
    g = PolarGrid(64, 64)
    u = ConformalFactor(GridField.constant(g, -0.1), 0.0)
    sol = solve_comparison(u)
    centre = radial_shooting(-0.1)
    got = pg.interpolate(sol.v.field, np.array([0.0]), np.array([0.0]))[0]
    assert got == pytest.approx(centre, abs=10 * g.h**2)
    # radial symmetry
    assert np.max(np.ptp(sol.v.values, axis=1)) <= 1e-10


def test_shooting_reproduces_closed_form():
    # log(2a/(1+a^2)) = b with a on the small branch
    a = 0.4
    b = math.log(2 * a / (1 + a * a))
    assert radial_shooting(b) == pytest.approx(math.log(2 * a), abs=1e-8)
    with pytest.raises(ValueError):
        radial_shooting(0.5)


def test_flat_data_fails_cleanly_or_finds_hemisphere():
    g = PolarGrid(32, 32)
    u = ConformalFactor(GridField.constant(g, 0.0), 0.0)
    try:
        sol = solve_comparison(u, max_iters=40)
    except SolverError as exc:
        assert exc.residual > 0
    else:
        rho0 = model_factor(0.0, g).values
        assert np.max(np.abs(sol.v.values - rho0)) < 0.1


def test_uniqueness_two_starts(sweep64):
    _, u, sol = sweep64[2]
    other = solve_comparison(u, v0=u.field - 1.0)
    assert np.max(np.abs(other.v.values - sol.v.values)) <= 10 * 1e-10


def test_monotone_iteration(sweep64):
    _, u, sol = sweep64[1]
    its = monotone_iteration(u, iters=400, tol=1e-12)
    for a, b in zip(its, its[1:]):
        assert np.all(b <= a + 1e-9)
    assert np.max(np.abs(its[-1] - sol.v.values)) <= 1e-8


def test_tol_validation(rho1_64):
    with pytest.raises(ValueError):
        solve_comparison(rho1_64, tol=1e-14)


def test_max_iters_error(sweep64):
    _, u, _ = sweep64[0]
    with pytest.raises(SolverError):
        solve_comparison(u, max_iters=0)


def test_report_json(sweep64):
    _, u, sol = sweep64[0]
    d = json.loads(report_json(sol, u))
    assert set(d) == {"residual_inf", "newton_iters", "ordering_margin", "robin_margin"}
