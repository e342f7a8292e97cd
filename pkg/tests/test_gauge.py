import json
import math

import numpy as np
import pytest

from capstab import polar_grid as pg
from capstab.conformal_metric import ConformalFactor, area, boundary_length, bump_family
from capstab.gauge import (MobiusTransform, NormalizationError, apply, derivative_modulus,
                           kernel_convergence_demo, normalize, pullback_factor)
from capstab.geodesy import geodesic_graph, inradius
from capstab.model_cap import model_factor, r_c


def disk_points(rng, n=100):
    r = np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * math.pi, size=n)
    return r * np.exp(1j * t)


def random_transform(rng, rmax=0.5):
    a = rmax * math.sqrt(rng.uniform()) * np.exp(2j * math.pi * rng.uniform())
    return MobiusTransform(complex(a), rng.uniform(-math.pi, math.pi))


def test_examples():
    x, y = np.array([0.3, -0.2]), np.array([0.1, 0.5])
    ident = MobiusTransform.identity()
    np.testing.assert_allclose(apply(ident, x, y), (x, y), atol=1e-15)
    np.testing.assert_allclose(derivative_modulus(ident, x, y), 1.0)
    rot = MobiusTransform(0, math.pi / 2)
    np.testing.assert_allclose(apply(rot, x, y), (-y, x), atol=1e-15)
    np.testing.assert_allclose(derivative_modulus(rot, x, y), 1.0)
    m = MobiusTransform((0.5, 0.0))
    assert abs(m(0.5)) < 1e-15
    assert float(derivative_modulus(m, 0.5, 0.0)) == pytest.approx(4 / 3)


def test_invalid_parameter():
    with pytest.raises(ValueError):
        MobiusTransform(1.0)
    with pytest.raises(ValueError):
        MobiusTransform((0.8, 0.8))


def test_group_laws(rng):
    z = disk_points(rng)
    for _ in range(5):
        m, n = random_transform(rng, 0.9), random_transform(rng, 0.9)
        np.testing.assert_allclose(m.inverse()(m(z)), z, atol=1e-12)
        np.testing.assert_allclose((m @ m.inverse())(z), z, atol=1e-12)
        np.testing.assert_allclose((m @ n)(z), m(n(z)), atol=1e-12)
        w = m(z)
        assert np.all(np.abs(w) <= 1 + 1e-12)
        assert np.all(m.derivative_modulus(z) > 0)


def test_json_round_trip():
    m = MobiusTransform((0.2, -0.1), 1.0)
    d = json.loads(m.to_json())
    assert set(d) == {"a", "theta"}
    back = MobiusTransform.from_dict(d)
    assert back.a == m.a and back.theta == m.theta


def test_identity_pullback(rho1_64):
    assert pullback_factor(rho1_64, MobiusTransform()) is rho1_64


@pytest.fixture(scope="module")
def test_factors(grid64):
    return [ConformalFactor(model_factor(c, grid64), c, f"model {c}") for c in (0.5, 1.0)] + [
        bump_family(1.0, 0.3, 0.001, grid64, width=0.4)]


def test_gauge_invariance(test_factors, rng):
    for f in test_factors:
        g = geodesic_graph(f)
        rin, _ = inradius(f, g)
        for _ in range(5):
            p = pullback_factor(f, random_transform(rng))
            h = f.grid.h
            assert boundary_length(p) == pytest.approx(boundary_length(f), abs=1e-4)
            assert area(p) == pytest.approx(area(f), abs=10 * h**2)
            rp, _ = inradius(p)
            assert abs(rp - rin) <= 2 * g.slack_for(rin)


def test_pullback_solves_liouville(grid128, rng):
    f = ConformalFactor(model_factor(1.0, grid128), 1.0)
    for _ in range(3):
        p = pullback_factor(f, random_transform(rng))
        res = pg.laplacian(p.field).values[:-1] + np.exp(2 * p.values[:-1])
        assert np.max(np.abs(res)) <= 50 * grid128.h**2


def test_cocycle(rho1_64, rng):
    m, n = random_transform(rng, 0.3), random_transform(rng, 0.3)
    twice = pullback_factor(pullback_factor(rho1_64, m), n)
    once = pullback_factor(rho1_64, m @ n)
    assert np.max(np.abs(twice.values - once.values)) <= 10 * rho1_64.grid.h**2


def test_normalize_model_is_identity(rho1_64):
    res = normalize(rho1_64)
    assert res.iterations == 0
    assert res.transform.a == 0
    assert res.factor is rho1_64


def test_normalize_round_trip(grid128):
    f = ConformalFactor(model_factor(1.0, grid128), 1.0)
    moved = pullback_factor(f, MobiusTransform((-0.3, 0.0)))  # incenter at (-0.3, 0)
    res = normalize(moved)
    h = grid128.h
    assert abs(res.transform.a + 0.3) <= 2 * h
    assert res.offset <= 2 * h
    assert np.max(np.abs(res.factor.values - f.values)) <= 0.05


def test_normalize_bump(grid64):
    f = bump_family(1.0, 0.3, 0.001, grid64, width=0.4)
    res = normalize(f)
    assert res.offset <= 2 * grid64.h


def test_normalize_failure_reports_offset(grid64):
    f = ConformalFactor(model_factor(1.0, grid64), 1.0)
    moved = pullback_factor(f, MobiusTransform((-0.6, 0.0)))
    with pytest.raises(NormalizationError) as err:
        normalize(moved, max_iters=0)
    assert err.value.offset > 2 * grid64.h


def test_kernel_demo():
    psis = [2.0**-k for k in range(1, 12)] + [0.0]
    steps = kernel_convergence_demo(1.0, psis)
    ells = [s.ell for s in steps]
    assert np.all(np.diff(ells) > 0)
    assert ells[-1] == pytest.approx(r_c(1.0), rel=1e-15)
    assert steps[-1].gaps[0.9] == pytest.approx(0.0, abs=1e-14)
    gaps = [s.gaps[0.9] for s in steps]
    assert np.all(np.diff(gaps) < 0)
    # linear rate once psi is small
    ratios = [s.ratios[0.5] for s in steps if 0 < s.psi <= 2.0**-6]
    assert max(ratios) <= 2.5
    assert abs(ratios[-1] - ratios[-2]) < 0.01
    assert math.isnan(steps[-1].ratios[0.5])
    tiny = kernel_convergence_demo(1.0, [1e-9])[0]
    assert tiny.gaps[0.5] < 1e-8
    with pytest.raises(ValueError):
        kernel_convergence_demo(1.0, [0.1, 0.2])
