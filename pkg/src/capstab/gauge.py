"""Mobius self-maps of the unit disk and their action on conformal factors.

For a disk automorphism ``phi`` the factor ``(f)_phi = f o phi + log|phi'|``
describes the pulled-back metric, so ``phi`` is an isometry from the new
metric onto the old one.  Geometry is invariant under this action; the
package uses it to move the intrinsic incenter to the origin.
"""

from __future__ import annotations

import cmath
import json
import math
from dataclasses import dataclass

import numpy as np

from . import geodesy
from . import polar_grid as pg
from .conformal_metric import ConformalFactor
from .model_cap import model_factor_values, r_c, stereo_inball_radius
from .polar_grid import GridField


class NormalizationError(RuntimeError):
    def __init__(self, message: str, offset: float):
        super().__init__(f"{message} (final incenter offset {offset:.3e})")
        self.offset = offset


@dataclass(frozen=True)
class MobiusTransform:
    """``z -> exp(i theta) (z - a) / (1 - conj(a) z)``."""

    a: complex = 0j
    theta: float = 0.0

    def __post_init__(self):
        a = complex(*self.a) if isinstance(self.a, (tuple, list)) else complex(self.a)
        if abs(a) >= 1:
            raise ValueError(f"|a| must be < 1, got {abs(a)}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "theta", math.remainder(float(self.theta), 2 * math.pi))

    @classmethod
    def identity(cls) -> "MobiusTransform":
        return cls()

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return cmath.exp(1j * self.theta) * (z - self.a) / (1 - self.a.conjugate() * z)

    def derivative_modulus(self, z):
        z = np.asarray(z, dtype=complex)
        return (1 - abs(self.a) ** 2) / np.abs(1 - self.a.conjugate() * z) ** 2

    def _matrix(self) -> np.ndarray:
        # SU(1,1) form [[al, be], [conj(be), conj(al)]] acting by (al z + be) / (conj(be) z + conj(al))
        half = cmath.exp(0.5j * self.theta)
        return np.array([[half, -self.a * half],
                         [(-self.a * half).conjugate(), half.conjugate()]])

    @classmethod
    def _from_matrix(cls, m: np.ndarray) -> "MobiusTransform":
        al, be = m[0, 0], m[0, 1]
        return cls(-be / al, cmath.phase(al / al.conjugate()))

    def inverse(self) -> "MobiusTransform":
        return MobiusTransform(-self.a * cmath.exp(1j * self.theta), -self.theta)

    def compose(self, other: "MobiusTransform") -> "MobiusTransform":
        """``self o other``."""
        return self._from_matrix(self._matrix() @ other._matrix())

    def __matmul__(self, other: "MobiusTransform") -> "MobiusTransform":
        return self.compose(other)

    def to_dict(self) -> dict:
        return {"a": [self.a.real, self.a.imag], "theta": self.theta}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MobiusTransform":
        x, y = data["a"]
        return cls(complex(x, y), float(data["theta"]))


def apply(m: MobiusTransform, x, y) -> tuple[np.ndarray, np.ndarray]:
    """Image of plane points ``(x, y)`` under ``m``."""
    w = m(np.asarray(x) + 1j * np.asarray(y))
    return w.real, w.imag


def derivative_modulus(m: MobiusTransform, x, y) -> np.ndarray:
    return m.derivative_modulus(np.asarray(x) + 1j * np.asarray(y))


def pullback_values(f: GridField, m: MobiusTransform) -> np.ndarray:
    grid = f.grid
    z = grid.x + 1j * grid.y
    w = m(z)
    r = np.abs(w)
    w = np.where(r > 1, w / np.maximum(r, 1e-300), w)  # roundoff on the circle
    return pg.interpolate(f, w.real, w.imag) + np.log(m.derivative_modulus(z))


def pullback_factor(f: ConformalFactor, m: MobiusTransform) -> ConformalFactor:
    """``f o m + log|m'|`` resampled on the same grid (cubic interpolation)."""
    if m.a == 0 and m.theta == 0:
        return f
    return ConformalFactor(GridField(f.grid, pullback_values(f.field, m)), f.c,
                           label=f"{f.label}|pullback")


@dataclass(frozen=True, eq=False)
class Normalization:
    transform: MobiusTransform
    factor: ConformalFactor
    offset: float
    iterations: int


def normalize(f: ConformalFactor, max_iters: int = 10, n_cart: int | None = None,
              ) -> Normalization:
    """Move the intrinsic incenter to the origin.

    Each pass locates the node farthest from the boundary in the current
    metric, composes the accumulated transform with the a-only map sending
    that node to 0, and pulls ``f`` back in one step from the original factor.
    Stops once the incenter lies within ``2 h`` of the origin.  The returned
    ``transform`` maps the original incenter to 0, and ``factor`` is
    ``(f)_{transform^-1}``.  Rotation is left as it falls out of composition.
    """
    grid = f.grid
    tol = 2 * grid.h
    total = MobiusTransform.identity()
    current = f
    offset = math.inf
    for it in range(max_iters + 1):
        _, node = geodesy.inradius(current, geodesy.geodesic_graph(current, n_cart))
        i, j = divmod(node, grid.ntheta)
        p = complex(grid.x[i, j], grid.y[i, j])
        offset = abs(p)
        if offset <= tol:
            return Normalization(total, current, offset, it)
        if it == max_iters:
            break
        # current = (f)_{total^-1}; its point p corresponds to total^-1(p) in f
        total = MobiusTransform(p) @ total
        current = pullback_factor(f, total.inverse())
    raise NormalizationError(f"incenter not within {tol:.3g} after {max_iters} passes", offset)


@dataclass(frozen=True)
class KernelStep:
    psi: float
    ell: float
    gaps: dict
    ratios: dict

    def to_dict(self) -> dict:
        return {"psi": self.psi, "ell": self.ell,
                "gaps": {str(k): v for k, v in self.gaps.items()},
                "ratios": {str(k): v for k, v in self.ratios.items()}}


def kernel_convergence_demo(c: float, psis, radii=(0.5, 0.9), samples: int = 2001,
                            ) -> list[KernelStep]:
    """Round domains ``B_ell`` with ``ell = stereo_inball_radius(c, psi)`` and
    maps ``F = ell * Id``: the factors ``(rho_0)_F = log(2 ell / (1 + ell^2 r^2))``
    approach ``rho_c`` on every ``B_r`` as ``psi -> 0``.

    ``gaps[r]`` is the max-norm distance on ``B_r`` and ``ratios[r]`` divides it
    by ``|ell - R_c|`` (``nan`` when ``ell = R_c``).
    """
    psis = [float(p) for p in psis]
    if any(p < 0 for p in psis) or any(b > a for a, b in zip(psis, psis[1:])):
        raise ValueError("psi sequence must be non-negative and non-increasing")
    R = r_c(c)
    out = []
    for psi in psis:
        ell = stereo_inball_radius(c, psi)
        gaps, ratios = {}, {}
        for r in radii:
            t = np.linspace(0.0, r, samples)
            induced = np.log(2 * ell / (1 + ell**2 * t**2))
            gap = float(np.max(np.abs(induced - model_factor_values(c, t, 0.0))))
            gaps[r] = gap
            close = math.isclose(ell, R, rel_tol=1e-14)
            ratios[r] = float("nan") if close else gap / abs(ell - R)
        out.append(KernelStep(psi, ell, gaps, ratios))
    return out
