"""Closed-form geometry of the round spherical cap of boundary curvature c."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .polar_grid import GridField, PolarGrid


def arccot(x: float) -> float:
    """Inverse cotangent with range (0, pi/2] on [0, inf], arccot(inf) = 0."""
    if math.isinf(x):
        return 0.0
    if x == 0:
        return math.pi / 2
    return math.atan(1.0 / x) if x > 0 else math.pi + math.atan(1.0 / x)


def r_c(c: float) -> float:
    """Dilation constant sqrt(1 + c^2) - c, written in cancellation-free form."""
    if c < 0:
        raise ValueError(f"c must be >= 0, got {c}")
    return 1.0 / (math.sqrt(1.0 + c * c) + c)


@dataclass(frozen=True)
class CapParams:
    c: float
    R_c: float
    cap_radius: float
    boundary_length: float
    area: float

    @classmethod
    def from_c(cls, c: float) -> "CapParams":
        if c < 0 or not math.isfinite(c):
            raise ValueError(f"c must be finite and >= 0, got {c}")
        s = math.sqrt(1.0 + c * c)
        return cls(
            c=c,
            R_c=r_c(c),
            cap_radius=arccot(c),
            boundary_length=2 * math.pi / s,
            area=2 * math.pi * (1 - c / s),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def model_factor_values(c: float, x, y) -> np.ndarray:
    """rho_c(x) = log(2 R_c / (1 + |R_c x|^2)) evaluated pointwise."""
    R = r_c(c)
    return np.log(2 * R / (1 + R * R * (np.asarray(x) ** 2 + np.asarray(y) ** 2)))


def model_factor(c: float, grid: PolarGrid) -> GridField:
    """Conformal factor of the cap of boundary curvature ``c`` on the unit disk."""
    if c < 0 or not math.isfinite(c):
        raise ValueError(f"c must be finite and >= 0, got {c}")
    values = model_factor_values(c, grid.x, grid.y)
    # exact boundary value by 1 + R_c^2 = 2 R_c sqrt(1 + c^2)
    values[-1] = -0.5 * math.log1p(c * c)
    return GridField(grid, values)


def inradius_lower_bound(c: float, L: float) -> float:
    """Lower bound on the inradius of a c-convex spherical domain with
    boundary length ``L``:  arccot(c) - arccot(c sec(L sqrt(1 + c^2) / 4)).

    The extremal length ``2 pi / sqrt(1 + c^2)`` returns ``arccot(c)``.
    """
    if c <= 0:
        raise ValueError(f"c must be > 0, got {c}")
    s = math.sqrt(1 + c * c)
    extremal = 2 * math.pi / s
    if L <= 0:
        raise ValueError(f"L must be > 0, got {L}")
    if L > extremal * (1 + 1e-12):
        raise ValueError(f"L={L} exceeds the extremal length {extremal}")
    arg = L * s / 4
    if L >= extremal or math.cos(arg) <= 0:
        return arccot(c)
    return arccot(c) - arccot(c / math.cos(arg))


def stereographic(p) -> np.ndarray:
    """Projection from the north pole of the unit sphere onto the plane z=0."""
    p = np.asarray(p, dtype=float)
    norm = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norm - 1) > 1e-9):
        raise ValueError("stereographic projection needs unit vectors")
    if np.any(np.isclose(p[..., 2], 1.0, rtol=0, atol=1e-14)):
        raise ValueError("the north pole has no image")
    d = 1 - p[..., 2]
    return np.stack([p[..., 0] / d, p[..., 1] / d], axis=-1)


def inverse_stereographic(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    s = np.sum(q * q, axis=-1)
    return np.stack([2 * q[..., 0], 2 * q[..., 1], s - 1], axis=-1) / (1 + s)[..., None]


def stereo_inball_radius(c: float, psi: float) -> float:
    """Euclidean radius of the stereographic image of the spherical ball of
    radius ``2 arccot(c + psi) - arccot(c)``, i.e. tan of half that angle."""
    if c <= 0 or psi < 0:
        raise ValueError(f"need c > 0 and psi >= 0, got c={c}, psi={psi}")
    angle = 2 * arccot(c + psi) - arccot(c)
    if not 0 < angle < math.pi:
        raise ValueError(f"angle {angle} outside (0, pi) for c={c}, psi={psi}")
    return math.sin(angle) / (1 + math.cos(angle))
