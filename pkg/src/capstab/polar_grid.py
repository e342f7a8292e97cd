"""Finite-difference discretization of the closed unit disk.

Nodes sit on a staggered polar lattice ``r_i = (i + 1/2) h_r`` for
``i = 0 .. nr - 1`` plus an explicit boundary ring at ``r = 1`` (which is
exactly ``r_nr`` since ``h_r = 1 / (nr + 1/2)``), with uniform angles
``theta_j = 2 pi j / ntheta``.  Field values are stored as a
``(nr + 1, ntheta)`` array whose last row is the boundary ring; the flat
layout used for serialization is the row-major ravel of that array.

Area quadrature uses exact annulus areas.  The outermost interior ring
owns the annulus ``[(nr - 1) h_r, 1]`` and the boundary ring carries zero
area weight, so Laplacian sentinels on the ring never enter integrals and
the discrete divergence theorem holds to second order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp


class GridMismatchError(ValueError):
    """Raised when a field is combined with an operator on another grid."""


@dataclass(frozen=True)
class PolarGrid:
    nr: int
    ntheta: int

    def __post_init__(self):
        if self.nr < 8:
            raise ValueError(f"nr must be >= 8, got {self.nr}")
        if self.ntheta < 8 or self.ntheta % 2:
            raise ValueError(f"ntheta must be even and >= 8, got {self.ntheta}")

    @property
    def h_r(self) -> float:
        return 1.0 / (self.nr + 0.5)

    @property
    def h_theta(self) -> float:
        return 2.0 * math.pi / self.ntheta

    @property
    def h(self) -> float:
        """Mesh width used to scale tolerances, ``max(h_r, h_theta)``."""
        return max(self.h_r, self.h_theta)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nr + 1, self.ntheta)

    @property
    def size(self) -> int:
        return (self.nr + 1) * self.ntheta

    @property
    def n_interior(self) -> int:
        return self.nr * self.ntheta

    @cached_property
    def r(self) -> np.ndarray:
        """Radii of the ``nr + 1`` rings, the last one equal to 1."""
        r = (np.arange(self.nr + 1) + 0.5) * self.h_r
        r[-1] = 1.0
        return r

    @cached_property
    def theta(self) -> np.ndarray:
        return np.arange(self.ntheta) * self.h_theta

    @cached_property
    def rr(self) -> np.ndarray:
        return np.broadcast_to(self.r[:, None], self.shape)

    @cached_property
    def tt(self) -> np.ndarray:
        return np.broadcast_to(self.theta[None, :], self.shape)

    @cached_property
    def x(self) -> np.ndarray:
        return self.rr * np.cos(self.tt)

    @cached_property
    def y(self) -> np.ndarray:
        return self.rr * np.sin(self.tt)

    @cached_property
    def area_weights(self) -> np.ndarray:
        """Per-node area weights, shape ``(nr + 1, ntheta)``; they sum to pi."""
        h = self.h_r
        edges = np.arange(self.nr + 1) * h
        edges[-1] = 1.0
        ring = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2) / self.ntheta
        w = np.zeros(self.shape)
        w[:-1, :] = ring[:, None]
        return w

    @cached_property
    def boundary_weights(self) -> np.ndarray:
        return np.full(self.ntheta, self.h_theta)

    def node_index(self, i: int, j: int) -> int:
        return i * self.ntheta + (j % self.ntheta)

    def node_xy(self, index) -> np.ndarray:
        index = np.asarray(index)
        return np.stack([self.x.ravel()[index], self.y.ravel()[index]], axis=-1)

    @cached_property
    def laplacian_matrix(self) -> sp.csr_matrix:
        """Sparse ``(nr*ntheta, size)`` matrix mapping all node values to
        the five-point polar Laplacian at interior nodes."""
        nr, nt, h, ht = self.nr, self.ntheta, self.h_r, self.h_theta
        i, j = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
        i, j = i.ravel(), j.ravel()
        row = i * nt + j
        ri = (i + 0.5) * h
        r_out = (i + 1.0) * h
        r_in = i * h
        c_out = r_out / (ri * h * h)
        c_in = r_in / (ri * h * h)
        c_t = 1.0 / (ri * ri * ht * ht)
        rows = [row, row, row, row, row]
        cols = [
            row,
            (i + 1) * nt + j,
            np.where(i > 0, (i - 1) * nt + j, row),
            i * nt + (j + 1) % nt,
            i * nt + (j - 1) % nt,
        ]
        vals = [-(c_out + c_in) - 2 * c_t, c_out, np.where(i > 0, c_in, 0.0), c_t, c_t]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_interior, self.size),
        )

    @cached_property
    def laplacian_blocks(self) -> tuple[sp.csc_matrix, sp.csc_matrix]:
        """``(L_II, L_IB)``: interior-interior and interior-boundary blocks."""
        lap = self.laplacian_matrix.tocsc()
        return lap[:, : self.n_interior].tocsc(), lap[:, self.n_interior :].tocsc()

    def to_dict(self) -> dict:
        return {"nr": self.nr, "ntheta": self.ntheta}


@dataclass(frozen=True, eq=False)
class GridField:
    """Scalar field sampled at every node of a :class:`PolarGrid`."""

    grid: PolarGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.size != self.grid.size:
            raise GridMismatchError(
                f"expected {self.grid.size} values for {self.grid}, got {values.size}"
            )
        values = values.reshape(self.grid.shape)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: PolarGrid, func) -> "GridField":
        """Sample ``func(x, y)`` at every node."""
        return cls(grid, np.broadcast_to(func(grid.x, grid.y), grid.shape).copy())

    @classmethod
    def constant(cls, grid: PolarGrid, value: float) -> "GridField":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def interior(self) -> np.ndarray:
        return self.values[:-1]

    @property
    def boundary(self) -> np.ndarray:
        return self.values[-1]

    def map(self, func) -> "GridField":
        return GridField(self.grid, func(self.values))

    def __add__(self, other):
        return _binary(self, other, np.add)

    def __sub__(self, other):
        return _binary(self, other, np.subtract)

    def __mul__(self, other):
        return _binary(self, other, np.multiply)

    __rmul__ = __mul__

    def __neg__(self):
        return GridField(self.grid, -self.values)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "values": self.values.ravel().tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "GridField":
        grid = PolarGrid(int(data["grid"]["nr"]), int(data["grid"]["ntheta"]))
        return cls(grid, np.asarray(data["values"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "GridField":
        return cls.from_dict(json.loads(text))


def _binary(a: GridField, b, op) -> GridField:
    if isinstance(b, GridField):
        _check_same_grid(a.grid, b.grid)
        return GridField(a.grid, op(a.values, b.values))
    return GridField(a.grid, op(a.values, b))


def _check_same_grid(g1: PolarGrid, g2: PolarGrid) -> None:
    if g1 != g2:
        raise GridMismatchError(f"grid mismatch: {g1} vs {g2}")


def laplacian(f: GridField, grid: PolarGrid | None = None) -> GridField:
    """Second-order polar Laplacian at interior nodes.

    The boundary ring of the result holds NaN; it carries zero area weight
    and is skipped by :func:`lp_norm`.
    """
    if grid is not None:
        _check_same_grid(grid, f.grid)
    g = f.grid
    out = np.full(g.shape, np.nan)
    out[:-1] = laplacian_values(f.values, g)
    return GridField(g, out)


def laplacian_values(values: np.ndarray, grid: PolarGrid) -> np.ndarray:
    """Interior Laplacian of a ``(nr + 1, ntheta)`` array in difference form.

    Same stencil as :attr:`PolarGrid.laplacian_matrix`, but neighbour
    differences are formed before scaling so round-off stays proportional
    to the local variation rather than to the ``1/r^2`` coefficients.
    """
    h, ht = grid.h_r, grid.h_theta
    v = values
    i = np.arange(grid.nr)[:, None]
    ri = (i + 0.5) * h
    d_out = v[1:] - v[:-1]  # (nr, ntheta): f_{i+1} - f_i
    d_in = np.vstack([np.zeros((1, grid.ntheta)), d_out[:-1]])
    radial = ((i + 1.0) * d_out - i * d_in) / (ri * h)
    vi = v[:-1]
    dt = np.roll(vi, -1, axis=1) - vi
    angular = (dt - np.roll(dt, 1, axis=1)) / (ri * ri * ht * ht)
    return radial + angular


def normal_derivative(f: GridField) -> np.ndarray:
    """One-sided second-order ``df/dr`` on the boundary ring."""
    v = f.values
    if v.shape[0] < 3:
        raise ValueError("need at least 3 radial layers")
    return (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * f.grid.h_r)


def gradient(f: GridField) -> tuple[np.ndarray, np.ndarray]:
    """Polar gradient components ``(df/dr, (1/r) df/dtheta)`` at every node.

    Centered differences in the interior; the innermost ring borrows the
    node across the origin, and the boundary ring uses one-sided radial
    differences.
    """
    g = f.grid
    v = f.values
    h = g.h_r
    half = g.ntheta // 2
    dr = np.empty_like(v)
    dr[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    dr[0] = (v[1] - np.roll(v[0], -half)) / (2 * h)
    dr[-1] = normal_derivative(f)
    dt = (np.roll(v, -1, axis=1) - np.roll(v, 1, axis=1)) / (2 * g.h_theta)
    return dr, dt / g.r[:, None]


def gradient_magnitude(f: GridField) -> GridField:
    dr, dt = gradient(f)
    return GridField(f.grid, np.hypot(dr, dt))


def integrate(f: GridField | np.ndarray, grid: PolarGrid | None = None) -> float:
    """Area integral with the grid quadrature (compensated summation)."""
    if isinstance(f, GridField):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f).reshape(grid.shape)
    w = grid.area_weights
    mask = w > 0
    return math.fsum((values[mask] * w[mask]).tolist())


def integrate_boundary(values: np.ndarray, grid: PolarGrid) -> float:
    return math.fsum((np.asarray(values) * grid.boundary_weights).tolist())


def lp_norm(f: GridField, p: float = 2.0, region: str = "interior") -> float:
    """Quadrature-weighted Lp norm over ``"interior"`` (the disk) or
    ``"boundary"`` (the circle).  ``p = inf`` gives the max norm."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    g = f.grid
    if region == "interior":
        values, w = f.values[:-1], g.area_weights[:-1]
    elif region == "boundary":
        values, w = f.values[-1], g.boundary_weights
    else:
        raise ValueError(f"unknown region {region!r}")
    a = np.abs(values)
    if math.isinf(p):
        return float(np.max(a))
    return math.fsum((w * a**p).ravel().tolist()) ** (1.0 / p)


def w1p_norm(f: GridField, p: float = 1.0) -> float:
    """``(||f||_p^p + ||grad f||_p^p)^(1/p)`` over the disk."""
    if p < 1 or math.isinf(p):
        raise ValueError(f"p must lie in [1, inf), got {p}")
    return (lp_norm(f, p) ** p + lp_norm(gradient_magnitude(f), p) ** p) ** (1.0 / p)


def restrict_norm(f: GridField | np.ndarray, p: float, radius: float, grid=None) -> float:
    """Lp norm of ``f`` over the nodes of the closed Euclidean ball of radius
    ``radius < 1`` (whole annulus cells, no partial-cell correction)."""
    if isinstance(f, GridField):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f).reshape(grid.shape)
    mask = (grid.rr <= radius) & (grid.area_weights > 0)
    a = np.abs(values[mask])
    return math.fsum((grid.area_weights[mask] * a**p).tolist()) ** (1.0 / p)


def solve_poisson(f: GridField | np.ndarray, grid: PolarGrid | None = None) -> GridField:
    """Solve ``-Lap w = f`` in the disk with ``w = 0`` on the circle."""
    import scipy.sparse.linalg as spla

    if isinstance(f, GridField):
        grid, values = f.grid, f.values
    else:
        values = np.asarray(f).reshape(grid.shape)
    lii, _ = grid.laplacian_blocks
    w = np.zeros(grid.shape)
    w[:-1] = spla.spsolve(lii, -values[:-1].ravel()).reshape(grid.nr, grid.ntheta)
    return GridField(grid, w)


def _lagrange_weights(t: np.ndarray) -> np.ndarray:
    # 4-point Lagrange weights for nodes at 0, 1, 2, 3 evaluated at t
    return np.stack(
        [
            -(t - 1) * (t - 2) * (t - 3) / 6,
            t * (t - 2) * (t - 3) / 2,
            -t * (t - 1) * (t - 3) / 2,
            t * (t - 1) * (t - 2) / 6,
        ],
        axis=-1,
    )


def interpolate(f: GridField, x, y) -> np.ndarray:
    """Tensor-product cubic Lagrange interpolation at points of the closed disk.

    Rows below the first ring are filled by reflection through the origin
    (``f(-r, theta) = f(r, theta + pi)``); near ``r = 1`` the stencil is
    shifted inward so no extrapolated data is used.
    """
    g = f.grid
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    if np.any(r > 1 + 1e-9):
        raise ValueError("interpolation point outside the closed unit disk")
    th = np.mod(np.arctan2(y, x), 2 * np.pi)
    half = g.ntheta // 2
    pad = 3
    mirrored = np.roll(f.values[:pad], -half, axis=1)[::-1]
    ext = np.vstack([mirrored, f.values])  # row k <-> ring k - pad
    ring_pos = r / g.h_r - 0.5 + pad  # fractional row in ext
    start = np.clip(np.floor(ring_pos).astype(int) - 1, 0, ext.shape[0] - 4)
    wr = _lagrange_weights(ring_pos - start)
    col_pos = th / g.h_theta
    cstart = np.floor(col_pos).astype(int) - 1
    wc = _lagrange_weights(col_pos - cstart)
    out = np.zeros(np.broadcast(r, th).shape)
    for a in range(4):
        rows = start + a
        for b in range(4):
            cols = (cstart + b) % g.ntheta
            out += wr[..., a] * wc[..., b] * ext[rows, cols]
    return out
