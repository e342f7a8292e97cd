"""Rotationally symmetric spheres ``dr^2 + phi(r)^2 dtheta^2``.

The main construction is the smoothed football: the quotient of the round
sphere by a rotation of order ``k`` (profile ``sin(r) / k``, two cone points)
with each tip replaced by a small spherical cap of higher curvature.  The
curvature jump at the junction is smoothed monotonically and the profile is
recovered by integrating ``phi'' = -K phi``, so ``K >= 1`` holds exactly.
The meridian through both poles is then a closed geodesic of length close
to ``2 pi``, while the surface has only ``1 / k`` of the round area.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .gh import MetricSample


class MatchingError(ValueError):
    """The cap cannot be glued C^1 to the football for these parameters."""


@dataclass(frozen=True, eq=False)
class WarpProfile:
    r: np.ndarray
    phi: np.ndarray
    k: int = 1
    s: float = 0.0
    rescale_factor: float = 1.0
    curvature_fn: Callable | None = field(default=None, repr=False)
    validate: bool = True

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "phi", phi)
        if r.shape != phi.shape or r.ndim != 1 or len(r) < 8:
            raise ValueError("r and phi must be matching 1-D arrays of length >= 8")
        if np.any(np.diff(r) <= 0) or r[0] != 0:
            raise ValueError("r must increase from 0")
        if np.any(phi[1:-1] <= 0):
            raise ValueError("phi must be positive in the interior")
        if self.validate:
            d0, d1 = self.end_slopes
            if abs(phi[0]) > 1e-9 or abs(phi[-1]) > 1e-9:
                raise ValueError("phi must vanish at both poles")
            if abs(d0 - 1) > 1e-6 or abs(d1 + 1) > 1e-6:
                raise ValueError(f"pole slopes {d0:.8f}, {d1:.8f} are not +1, -1")

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def h(self) -> float:
        return float(np.max(np.diff(self.r)))

    @property
    def spline(self) -> CubicSpline:
        # odd extension through both poles makes the spline see a smooth sphere
        r, p = self.r, self.phi
        rr = np.concatenate([-r[:0:-1], r, 2 * r[-1] - r[-2::-1]])
        pp = np.concatenate([-p[:0:-1], p, -p[-2::-1]])
        return CubicSpline(rr, pp)

    @property
    def end_slopes(self) -> tuple[float, float]:
        d = self.spline.derivative()
        return float(d(0.0)), float(d(self.r_max))

    @classmethod
    def from_function(cls, phi: Callable, r_max: float, n: int = 2001, **kw) -> "WarpProfile":
        r = np.linspace(0.0, r_max, n)
        vals = np.asarray(phi(r), dtype=float)
        vals[0] = vals[-1] = 0.0
        return cls(r, vals, **kw)

    def to_dict(self) -> dict:
        return {"r_max": self.r_max, "samples": np.stack([self.r, self.phi], 1).tolist(),
                "k": self.k, "s": self.s, "rescale_factor": self.rescale_factor}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, validate: bool = True) -> "WarpProfile":
        rp = np.asarray(data["samples"], dtype=float)
        return cls(rp[:, 0], rp[:, 1], int(data.get("k", 1)), float(data.get("s", 0.0)),
                   float(data.get("rescale_factor", 1.0)), validate=validate)


def curvature_profile(w: WarpProfile) -> tuple[np.ndarray, np.ndarray]:
    """``K = -phi'' / phi`` from the C^2 spline, at the midpoints of the samples.

    Returns ``(r_mid, K)``.
    """
    mid = 0.5 * (w.r[1:] + w.r[:-1])
    spl = w.spline
    phi = spl(mid)
    if np.any(phi <= 0):
        raise ValueError("phi is not positive at an interior node")
    return mid, -spl(mid, 2) / phi


def exact_min_curvature(w: WarpProfile, n: int = 200001) -> float:
    """Minimum of the curvature the profile was built from, on a dense grid."""
    if w.curvature_fn is None:
        raise ValueError("profile carries no constructed curvature")
    return float(np.min(w.curvature_fn(np.linspace(0.0, w.r_max, n))))


def gauss_bonnet_total(w: WarpProfile) -> float:
    """``int K dA`` by midpoint quadrature of ``-phi''`` times ``2 pi``."""
    mid, K = curvature_profile(w)
    phi = w.spline(mid)
    return 2 * math.pi * float(np.sum(K * phi * np.diff(w.r)))


def _smooth_step(x: np.ndarray) -> np.ndarray:
    """C-infinity monotone transition from 0 (x <= 0) to 1 (x >= 1)."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1 - x, 1.0)), 0.0)
    return a / (a + b)


def cap_matching(k: int, a: float) -> tuple[float, float]:
    """Cap ``lam sin(t / lam)`` glued C^1 to ``sin(r) / k`` at ``r = a``.

    Returns ``(lam, t0)`` where ``t0`` is the arclength of the cap.
    """
    if k < 1:
        raise MatchingError(f"k must be >= 1, got {k}")
    ratio = math.cos(a) / k
    if not 0 < a < math.pi / 2 or not -1 < ratio < 1 + 1e-15:
        raise MatchingError(f"no cap matches at junction a={a} for k={k}")
    beta = math.acos(min(ratio, 1.0))
    if beta == 0 or k == 1:  # no cone: the cap is the round sphere itself
        return 1.0, a
    lam = math.sin(a) / (k * math.sin(beta))
    return lam, lam * beta


def build_smoothed_football(k: int, s: float, n: int = 4001) -> WarpProfile:
    """Football ``sin(r) / k`` with both tips replaced by spherical caps.

    The caps are glued at football arclength ``a = s / 4`` from each tip.  The
    resulting curvature (``1 / lam^2`` on the cap, ``1`` on the band) is
    blended by a monotone C-infinity step of half-width ``s / 16`` centred at
    the junction, and ``phi`` solves ``phi'' = -K phi`` from the north pole
    to the equator (where ``phi' = 0``) and is mirrored to the south.  Because
    the blend never leaves ``[1, 1 / lam^2]``, ``K >= 1`` holds exactly and
    the rescale factor is 1.
    """
    if k < 1:
        raise MatchingError(f"k must be >= 1, got {k}")
    if not 0 < s < math.pi / 4:
        raise MatchingError(f"smoothing width s must lie in (0, pi/4), got {s}")
    a = s / 4
    lam, t0 = cap_matching(k, a)
    k_cap = 1.0 / lam**2
    half = s / 16

    def K_half(t):
        return k_cap + (1.0 - k_cap) * _smooth_step((np.asarray(t) - (t0 - half)) / (2 * half))

    sol = solve_ivp(lambda t, y: [y[1], -K_half(t) * y[0]], (0.0, 2 * math.pi),
                    [0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14, dense_output=True,
                    events=_equator_event, max_step=half / 4)
    if not sol.t_events[0].size:
        raise MatchingError("profile never reaches an equator")
    r_eq = float(sol.t_events[0][0])
    r_max = 2 * r_eq

    def K(r):
        r = np.asarray(r, dtype=float)
        return K_half(np.minimum(r, r_max - r))

    # resolve the cap and the blend, which are far narrower than the band
    fine_end = min(t0 + 2 * half, r_eq / 2)
    step = min(lam, half) / 40
    fine = np.arange(0.0, fine_end, step)
    fine = fine[fine < fine_end - 0.5 * step]
    coarse = np.linspace(fine_end, r_eq, max(n // 2, 8))
    north = np.concatenate([fine, coarse])
    r = np.concatenate([north, r_max - north[-2::-1]])
    phi = sol.sol(np.minimum(r, r_max - r))[0]
    phi[0] = phi[-1] = 0.0
    min_k = min(1.0, float(np.min(K(np.linspace(0, r_max, 20001)))))
    factor = math.sqrt(min_k)
    if factor < 1.0:
        # metric scaled by factor^2 multiplies curvature by 1 / factor^2
        return WarpProfile(r * factor, phi * factor, k, s, factor,
                           lambda x: K(np.asarray(x) / factor) / factor**2)
    return WarpProfile(r, phi, k, s, 1.0, K)


def _equator_event(t, y):
    return y[1]


_equator_event.terminal = True
_equator_event.direction = -1


def closed_geodesic_length(w: WarpProfile, kind: str = "parallel") -> float:
    """Length of a closed geodesic of the surface of revolution.

    ``"parallel"``: ``2 pi phi(r*)`` for the parallel at the interior maximum
    of ``phi`` (parallels are geodesic exactly where ``phi' = 0``).
    ``"meridian"``: ``2 r_max`` for the loop made of two opposite meridians,
    which closes smoothly through both poles.  ``"longest"``: the larger.
    """
    if kind == "meridian":
        return 2 * w.r_max
    if kind == "longest":
        return max(closed_geodesic_length(w, "parallel"), 2 * w.r_max)
    if kind != "parallel":
        raise ValueError(f"unknown kind {kind!r}")
    d = w.spline.derivative()
    crit = d.roots(extrapolate=False)
    crit = crit[(crit > 0) & (crit < w.r_max)]
    if crit.size == 0:
        raise ValueError("phi has no interior critical point")
    return 2 * math.pi * float(np.max(w.spline(crit)))


@dataclass(frozen=True, eq=False)
class RevolutionGraph:
    """Shortest-path graph on ``(r, theta)`` with straight-in-coordinates edges."""

    matrix: csr_matrix
    rt: np.ndarray
    c_graph: float
    additive: float
    mesh: float

    def slack_for(self, distance: float) -> float:
        return self.c_graph * distance + self.additive


def _edge_lengths(w: WarpProfile, r0, r1, dth, samples: int = 5) -> np.ndarray:
    """Metric length of ``(r, theta)``-linear segments by composite Simpson."""
    t = np.linspace(0.0, 1.0, samples)
    wts = np.ones(samples)
    wts[1:-1:2], wts[2:-1:2] = 4, 2
    wts /= 3 * (samples - 1)
    rr = r0[:, None] + (r1 - r0)[:, None] * t[None, :]
    phi = np.abs(w.spline(rr))
    speed = np.sqrt((r1 - r0)[:, None] ** 2 + (phi * dth[:, None]) ** 2)
    return speed @ wts


def revolution_graph(w: WarpProfile, nr: int = 160) -> RevolutionGraph:
    """Rings ``r_i = i dr`` (``0 < i < nr``) of ``ntheta`` nodes plus two poles.

    Ring nodes connect to rings up to two steps away with angular offsets
    chosen per ring so that edge directions in the local orthonormal frame
    are no more than ``atan(1/3)`` apart at the widest; the poles connect to
    every node of the first two rings by meridians.
    """
    dr = w.r_max / nr
    phi_max = float(np.max(w.phi))
    ntheta = max(16, 2 * math.ceil(math.pi * phi_max / dr))
    dth = 2 * math.pi / ntheta
    rings = np.arange(1, nr) * dr
    n_ring = len(rings)
    north, south = n_ring * ntheta, n_ring * ntheta + 1

    def node(i, j):
        return i * ntheta + (j % ntheta)

    heads, tails, r0s, r1s, dths = [], [], [], [], []
    worst_gap = 0.0
    j_all = np.arange(ntheta)
    for i, r in enumerate(rings):
        aspect = dr / max(float(w.spline(r)) * dth, 1e-300)
        reach = int(min(ntheta // 2, max(1, math.ceil(3 * aspect))))
        dirs = []
        for di in (0, 1, 2):
            if i + di >= n_ring:
                continue
            for dj in range(-reach, reach + 1):
                if (di == 0 and dj <= 0) or math.gcd(di, abs(dj)) != 1:
                    continue
                if di == 0 and dj != 1:
                    continue
                heads.append(node(i, j_all))
                tails.append(node(i + di, j_all + dj))
                r0s.append(np.full(ntheta, r))
                r1s.append(np.full(ntheta, rings[i + di]))
                dths.append(np.full(ntheta, dj * dth))
                dirs.append(math.atan2(di * dr, dj * float(w.spline(r)) * dth))
        if i + 2 < n_ring:  # the last rings are reached by edges from below
            gaps = np.diff([0.0] + sorted(dirs) + [math.pi])
            worst_gap = max(worst_gap, float(np.max(gaps)))
    for pole, rows, rp in ((north, (0, 1), 0.0), (south, (n_ring - 1, n_ring - 2), w.r_max)):
        for i in rows:
            heads.append(np.full(ntheta, pole))
            tails.append(node(i, j_all))
            r0s.append(np.full(ntheta, rp))
            r1s.append(np.full(ntheta, rings[i]))
            dths.append(np.zeros(ntheta))
    head, tail = np.concatenate(heads), np.concatenate(tails)
    wts = _edge_lengths(w, np.concatenate(r0s), np.concatenate(r1s), np.concatenate(dths))
    n = n_ring * ntheta + 2
    mat = csr_matrix((np.maximum(wts, 1e-15), (head, tail)), shape=(n, n))
    rt = np.vstack([np.stack(np.meshgrid(rings, j_all * dth, indexing="ij"), -1).reshape(-1, 2),
                    [[0.0, 0.0], [w.r_max, 0.0]]])
    cell = math.hypot(dr, phi_max * dth)
    return RevolutionGraph(mat, rt, 1 / math.cos(worst_gap / 2) - 1, 2 * cell, 0.5 * cell)


def geodesic_sample(w: WarpProfile, m: int, nr: int = 160,
                    graph: RevolutionGraph | None = None) -> MetricSample:
    """Farthest-point sample of ``m`` graph nodes, seeded at the north pole.

    The covering radius is the largest graph distance from any node to the
    sample plus the mesh cell radius.
    """
    if m < 16:
        raise ValueError(f"m must be >= 16, got {m}")
    graph = graph or revolution_graph(w, nr)
    n = graph.matrix.shape[0]
    if m > n:
        raise ValueError(f"m={m} exceeds the node count {n}")
    chosen = [n - 2]
    rows = [dijkstra(graph.matrix, directed=False, indices=n - 2)]
    nearest = rows[0].copy()
    for _ in range(1, m):
        cand = nearest.copy()
        cand[chosen] = -1.0
        nxt = int(np.argmax(cand))
        chosen.append(nxt)
        rows.append(dijkstra(graph.matrix, directed=False, indices=nxt))
        np.minimum(nearest, rows[-1], out=nearest)
    idx = np.asarray(chosen)
    d = np.vstack(rows)[:, idx]
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    tag = f"revolution k={w.k} s={w.s:g}"
    return MetricSample(d, float(nearest.max()) + graph.mesh, tag,
                        graph.slack_for(float(d.max())), idx)


def pole_distances(w: WarpProfile, nr: int = 160, graph: RevolutionGraph | None = None):
    """Graph distances from the north pole to every node, and the node coordinates."""
    graph = graph or revolution_graph(w, nr)
    n = graph.matrix.shape[0]
    return dijkstra(graph.matrix, directed=False, indices=n - 2), graph.rt
