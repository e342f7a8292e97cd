"""Conformal factors on the unit disk and the test families built from them.

A factor ``u`` stands for the metric ``exp(2u) g_euc``.  Curvature is
``K = -Lap(u) exp(-2u)`` and the boundary circle has geodesic curvature
``kappa = (du/dn + 1) exp(-u)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import polar_grid as pg
from .model_cap import model_factor
from .polar_grid import GridField, PolarGrid

TOL_K = 1e-6


class AdmissibilityError(ValueError):
    """A factor violates K >= 1 or kappa >= c beyond tolerance."""

    def __init__(self, message: str, node: tuple[int, int], margin: float):
        super().__init__(message)
        self.node = node
        self.margin = margin


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    field: GridField
    c: float
    label: str = ""

    @property
    def grid(self) -> PolarGrid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def to_dict(self) -> dict:
        d = self.field.to_dict()
        d["c"] = self.c
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ConformalFactor":
        return cls(GridField.from_dict(data), float(data["c"]))

    @classmethod
    def from_json(cls, text: str) -> "ConformalFactor":
        return cls.from_dict(json.loads(text))


def _field(u) -> GridField:
    return u.field if isinstance(u, ConformalFactor) else u


def gaussian_curvature(u) -> GridField:
    f = _field(u)
    return GridField(f.grid, -pg.laplacian(f).values * np.exp(-2 * f.values))


def boundary_curvature(u) -> np.ndarray:
    f = _field(u)
    return (pg.normal_derivative(f) + 1.0) * np.exp(-f.boundary)


def boundary_length(u) -> float:
    f = _field(u)
    return pg.integrate_boundary(np.exp(f.boundary), f.grid)


def area(u) -> float:
    f = _field(u)
    return pg.integrate(f.map(lambda v: np.exp(2 * v)))


def gauss_bonnet_residual(u) -> float:
    """|int K dA + int kappa ds - 2 pi| with the grid quadratures."""
    f = _field(u)
    total_k = pg.integrate(GridField(f.grid, -pg.laplacian(f).values))
    total_kappa = pg.integrate_boundary(boundary_curvature(f) * np.exp(f.boundary), f.grid)
    return abs(total_k + total_kappa - 2 * math.pi)


@dataclass(frozen=True)
class AdmissibilityReport:
    k_min: float
    k_node: tuple[int, int]
    kappa_min: float
    kappa_node: int

    def margin(self, c: float) -> float:
        return min(self.k_min - 1.0, self.kappa_min - c)


def admissibility(u: ConformalFactor) -> AdmissibilityReport:
    K = gaussian_curvature(u).values[:-1]
    kappa = boundary_curvature(u)
    k_node = np.unravel_index(int(np.argmin(K)), K.shape)
    j = int(np.argmin(kappa))
    return AdmissibilityReport(float(K[k_node]), (int(k_node[0]), int(k_node[1])),
                               float(kappa[j]), j)


def default_tol_k(grid: PolarGrid) -> float:
    """Admissibility slack: ``TOL_K`` or a tenth of h^2, whichever is larger."""
    return max(TOL_K, 0.1 * grid.h**2)


def check_admissible(u: ConformalFactor, tol_k: float | None = None) -> AdmissibilityReport:
    """Raise :class:`AdmissibilityError` unless K >= 1 - tol and kappa >= c - tol."""
    if tol_k is None:
        tol_k = default_tol_k(u.grid)
    rep = admissibility(u)
    if rep.k_min < 1 - tol_k:
        raise AdmissibilityError(
            f"K_min={rep.k_min:.6g} < 1 at node {rep.k_node}", rep.k_node, rep.k_min - 1
        )
    if rep.kappa_min < u.c - tol_k:
        node = (u.grid.nr, rep.kappa_node)
        raise AdmissibilityError(
            f"kappa_min={rep.kappa_min:.6g} < c={u.c} at boundary node {rep.kappa_node}",
            node, rep.kappa_min - u.c,
        )
    return rep


def epsilon_of_eta(c: float, eta: float) -> float:
    """Relative length deficit 1 - sqrt(1 + c^2) / sqrt(1 + eta + c^2)."""
    return 1.0 - math.sqrt((1 + c * c) / (1 + eta + c * c))


def eta_family(c: float, eta: float, grid: PolarGrid) -> ConformalFactor:
    """Cap of curvature 1 + eta and boundary curvature c.

    ``u = rho_{c'} - log(1 + eta) / 2`` with ``c' = c / sqrt(1 + eta)``; the
    constant shift scales K by ``1 + eta`` and kappa by ``sqrt(1 + eta)``.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    cp = c / math.sqrt(1 + eta)
    f = model_factor(cp, grid) - 0.5 * math.log1p(eta)
    return ConformalFactor(f, c, label=f"eta={eta:g}")


def bump(grid: PolarGrid, center=(0.0, 0.0), width: float = 0.2) -> GridField:
    """Smooth bump exp(1 - 1/(1 - s^2)), s = |x - center| / width, peak 1."""
    cx, cy = center
    if math.hypot(cx, cy) + width >= 1:
        raise ValueError("bump support must lie strictly inside the disk")
    s2 = ((grid.x - cx) ** 2 + (grid.y - cy) ** 2) / width**2
    inside = s2 < 1
    out = np.zeros(grid.shape)
    out[inside] = np.exp(1 - 1 / (1 - s2[inside]))
    return GridField(grid, out)


def bump_family(c: float, eta: float, t: float, grid: PolarGrid, center=(0.3, 0.0),
                width: float = 0.2, tol_k: float | None = None) -> ConformalFactor:
    """``eta_family(c, eta) + t * bump``, rejected unless admissible."""
    base = eta_family(c, eta, grid)
    u = ConformalFactor(base.field + t * bump(grid, center, width), c,
                        label=f"bump eta={eta:g} t={t:g}")
    check_admissible(u, tol_k)
    return u
