"""Constant-curvature comparison factor: -Lap v = exp(2v) in the disk, v = u on
the circle, by damped Newton iteration started at the supersolution u."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import polar_grid as pg
from .conformal_metric import ConformalFactor, boundary_curvature
from .polar_grid import GridField

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last scaled residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class ComparisonSolution:
    v: ConformalFactor
    residual_inf: float
    newton_iters: int
    ordering_margin: float
    history: list = field(default_factory=list, repr=False)

    def to_dict(self, robin_margin: float | None = None) -> dict:
        return {
            "residual_inf": self.residual_inf,
            "newton_iters": self.newton_iters,
            "ordering_margin": self.ordering_margin,
            "robin_margin": robin_margin,
        }


def _scaled_residual(lap_v: np.ndarray, ev: np.ndarray) -> float:
    return float(np.max(np.abs(lap_v + ev)) / (1.0 + np.max(ev)))


def solve_comparison(u: ConformalFactor, tol: float = 1e-10, max_iters: int = 30,
                     v0: GridField | None = None,
                     keep_iterates: bool = False) -> ComparisonSolution:
    """Newton's method for ``Lap v + exp(2v) = 0`` with Dirichlet data ``u``.

    Each step solves ``(Lap - diag(-2 exp(2v))) dv = -F(v)`` with a sparse LU
    factorization and halves the step until the max-norm residual drops.
    Convergence is declared on the scaled residual
    ``||Lap v + exp(2v)||_inf / (1 + ||exp(2v)||_inf) <= tol``.
    """
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    grid = u.grid
    lii, _ = grid.laplacian_blocks
    vb = u.field.boundary.copy()
    start = u.field if v0 is None else v0
    x = start.interior.ravel().copy()

    full = np.empty(grid.shape)
    full[-1] = vb

    def residual(x):
        ev = np.exp(2 * x)
        full[:-1] = x.reshape(grid.nr, grid.ntheta)
        return pg.laplacian_values(full, grid).ravel() + ev, ev

    F, ev = residual(x)
    res = float(np.max(np.abs(F)))
    scaled = _scaled_residual(F - ev, ev)
    history = [x.copy()] if keep_iterates else []
    iters = 0
    while scaled > tol:
        if iters >= max_iters:
            raise SolverError(f"no convergence in {max_iters} Newton steps", scaled)
        J = (lii + sp.diags(2 * ev)).tocsc()
        try:
            dx = spla.splu(J).solve(-F)
        except RuntimeError as exc:
            raise SolverError(f"linear solve failed: {exc}", scaled) from exc
        if not np.all(np.isfinite(dx)):
            raise SolverError("linear solve produced non-finite step", scaled)
        step = 1.0
        while True:
            x_new = x + step * dx
            F_new, ev_new = residual(x_new)
            res_new = float(np.max(np.abs(F_new)))
            if res_new < res or step < 1e-6:
                break
            step *= 0.5
        if res_new >= res and scaled > 10 * tol:
            raise SolverError("backtracking could not reduce the residual", scaled)
        x, F, ev, res = x_new, F_new, ev_new, res_new
        scaled = _scaled_residual(F - ev, ev)
        iters += 1
        if keep_iterates:
            history.append(x.copy())
        log.debug("newton %d: step %.3g scaled residual %.3e", iters, step, scaled)

    values = np.empty(grid.shape)
    values[:-1] = x.reshape(grid.nr, grid.ntheta)
    values[-1] = vb
    v = ConformalFactor(GridField(grid, values), u.c, label=f"comparison({u.label})")
    margin = float(np.min(u.values - values))
    return ComparisonSolution(v, scaled, iters, margin, history)


def monotone_iteration(u: ConformalFactor, iters: int = 50, tol: float = 1e-10,
                       shift: float | None = None) -> list[np.ndarray]:
    """Sub-super solution iteration started at the supersolution ``u``.

    Solves ``(-Lap + M) v_{k+1} = exp(2 v_k) + M v_k`` with Dirichlet data
    ``u``; for ``M >= 2 max exp(2u)`` the right-hand side is increasing in
    ``v`` on ``v <= u``, so the iterates decrease pointwise.  Returns the
    list of full ``(nr + 1, ntheta)`` iterates, ``u`` first.
    """
    grid = u.grid
    lii, lib = grid.laplacian_blocks
    vb = u.field.boundary
    M = 2.0 * float(np.exp(2 * u.values).max()) if shift is None else shift
    lu = spla.splu((-lii + M * sp.identity(grid.n_interior)).tocsc())
    rhs_b = lib @ vb
    x = u.field.interior.ravel().copy()
    out = [u.values.copy()]
    for _ in range(iters):
        x_new = lu.solve(np.exp(2 * x) + M * x + rhs_b)
        full = np.empty(grid.shape)
        full[:-1] = x_new.reshape(grid.nr, grid.ntheta)
        full[-1] = vb
        out.append(full)
        done = np.max(np.abs(x_new - x)) < tol
        x = x_new
        if done:
            break
    return out


@dataclass(frozen=True)
class RobinReport:
    robin_margin: float
    max_dn_w: float

    def to_dict(self) -> dict:
        return {"robin_margin": self.robin_margin, "max_dn_w": self.max_dn_w}


def verify_robin(sol: ComparisonSolution, u: ConformalFactor) -> RobinReport:
    """min over the circle of (dv/dn + 1) - c exp(v), and max d(u - v)/dn."""
    v = sol.v.field
    margin = (pg.normal_derivative(v) + 1) - u.c * np.exp(v.boundary)
    dn_w = pg.normal_derivative(u.field - v)
    return RobinReport(float(np.min(margin)), float(np.max(dn_w)))


def radial_shooting(boundary_value: float, branch: str = "small") -> float:
    """Central value ``v(0)`` of the radial solution of ``v'' + v'/r + exp(2v) = 0``
    with ``v(1) = boundary_value``, found by shooting on the central value.

    The closed form ``log(2a / (1 + a^2 r^2))`` is deliberately not used; the
    ODE is integrated numerically.  ``branch`` selects the solution below
    (``"small"``, cap smaller than a hemisphere) or above the fold at the
    hemisphere.
    """
    from scipy.integrate import solve_ivp
    from scipy.optimize import brentq, minimize_scalar

    def end_value(s):
        r0 = 1e-6
        y0 = [s - np.exp(2 * s) * r0**2 / 4, -np.exp(2 * s) * r0 / 2]
        sol = solve_ivp(lambda r, y: [y[1], -y[1] / r - np.exp(2 * y[0])], (r0, 1.0), y0,
                        rtol=1e-12, atol=1e-13, method="DOP853")
        return sol.y[0, -1]

    peak = minimize_scalar(lambda s: -end_value(s), bounds=(-3, 3), method="bounded",
                           options={"xatol": 1e-12})
    s_star, top = peak.x, -peak.fun
    if boundary_value > top + 1e-10:
        raise ValueError(f"no radial solution with boundary value {boundary_value}")
    if abs(boundary_value - top) <= 1e-10:
        return s_star
    if branch == "small":
        return brentq(lambda s: end_value(s) - boundary_value, -20, s_star, xtol=1e-14)
    return brentq(lambda s: end_value(s) - boundary_value, s_star, 20, xtol=1e-14)


def report_json(sol: ComparisonSolution, u: ConformalFactor) -> str:
    return json.dumps(sol.to_dict(verify_robin(sol, u).robin_margin))


def boundary_curvature_gap(u: ConformalFactor, sol: ComparisonSolution) -> np.ndarray:
    """Pointwise kappa_u - kappa_v on the circle."""
    return boundary_curvature(u) - boundary_curvature(sol.v)
