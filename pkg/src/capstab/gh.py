"""Gromov-Hausdorff estimates between finite samples of metric spaces.

A :class:`MetricSample` carries its distance matrix together with two error
terms: ``d_slack`` (the stored distances may overshoot the true ones by at
most this much and never undershoot) and ``covering_radius`` (every point of
the underlying space lies within this true distance of a sample point).
Both are folded into the bounds so they remain inequalities about the
underlying spaces, not just the samples.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import geodesy
from .conformal_metric import ConformalFactor

MAX_EXACT = 6


@dataclass(frozen=True, eq=False)
class MetricSample:
    d: np.ndarray
    covering_radius: float
    tag: str = ""
    d_slack: float = 0.0
    indices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        if self.covering_radius < 0 or self.d_slack < 0:
            raise ValueError("covering_radius and d_slack must be >= 0")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]

    @property
    def diameter(self) -> float:
        return float(self.d.max())

    def scaled(self, factor: float) -> "MetricSample":
        return MetricSample(self.d * factor, self.covering_radius * factor,
                            f"{self.tag}*{factor:g}", self.d_slack * factor, self.indices)

    def metric_violation(self) -> float:
        """Largest failure of symmetry, zero diagonal or the triangle inequality."""
        d = self.d
        tri = d[:, None, :] - d[:, :, None] - d[None, :, :]
        return float(max(np.abs(d - d.T).max(), np.abs(np.diag(d)).max(), tri.max(), 0.0))

    def to_dict(self) -> dict:
        out = {"n": self.n, "d": self.d.ravel().tolist(),
               "covering_radius": self.covering_radius, "tag": self.tag,
               "d_slack": self.d_slack}
        if self.indices is not None:
            out["indices"] = [int(i) for i in self.indices]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "MetricSample":
        n = int(data["n"])
        idx = data.get("indices")
        return cls(np.asarray(data["d"], dtype=float).reshape(n, n),
                   float(data["covering_radius"]), data.get("tag", ""),
                   float(data.get("d_slack", 0.0)),
                   None if idx is None else np.asarray(idx, dtype=int))

    @classmethod
    def from_json(cls, text: str) -> "MetricSample":
        return cls.from_dict(json.loads(text))


def gh_upper_identity(a: MetricSample, b: MetricSample) -> float:
    """Bound from the correspondence pairing sample point ``i`` of ``a`` with
    sample point ``i`` of ``b``, extended to the full spaces through the
    covering radii."""
    if a.n != b.n:
        raise ValueError(f"size mismatch: {a.n} vs {b.n}")
    dis = float(np.abs(a.d - b.d).max()) + max(a.d_slack, b.d_slack)
    return 0.5 * dis + a.covering_radius + b.covering_radius


def _diameter_interval(s: MetricSample) -> tuple[float, float]:
    diam = s.diameter
    return max(diam - s.d_slack, 0.0), diam + 2 * s.covering_radius


def _radius_interval(s: MetricSample) -> tuple[float, float]:
    """Bracket for ``min_x max_y d(x, y)`` of the underlying space."""
    rad = float(s.d.max(axis=1).min())
    return max(rad - s.d_slack - s.covering_radius, 0.0), rad + s.covering_radius


def fps_order(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Farthest-point order on a finite matrix, seeded at index 0.

    Returns ``(order, cover)`` where ``cover[k]`` is the covering radius of
    the sample by its first ``k + 1`` points in that order.
    """
    n = d.shape[0]
    order = [0]
    nearest = d[0].copy()
    cover = [float(nearest.max())]
    for _ in range(1, n):
        nxt = int(np.argmax(nearest))
        order.append(nxt)
        np.minimum(nearest, d[nxt], out=nearest)
        cover.append(float(nearest.max()))
    return np.asarray(order), np.asarray(cover)


def greedy_packing(d: np.ndarray, eps: float) -> int:
    """Size of a greedy set with pairwise distances > ``eps`` (index order)."""
    chosen: list[int] = []
    for i in range(d.shape[0]):
        if all(d[i, j] > eps for j in chosen):
            chosen.append(i)
    return len(chosen)


def _packing_bound(a: MetricSample, b: MetricSample, eps_grid) -> float:
    """If the space behind ``a`` holds ``P`` points pairwise farther than
    ``eps`` and the one behind ``b`` has a net of fewer than ``P`` points with
    radius ``r``, two packing points share a net ball, which forces
    ``d_GH >= eps / 2 - r``."""
    _, cover_b = fps_order(b.d)
    best = 0.0
    for eps in eps_grid:
        p = greedy_packing(a.d, eps + a.d_slack)
        if p < 2 or p - 1 > b.n:
            continue
        r = cover_b[p - 2] + b.covering_radius
        best = max(best, eps / 2 - r)
    return best


def eps_grid(a: MetricSample, b: MetricSample, count: int = 16, lo: float = 0.05):
    top = max(a.diameter, b.diameter) / 2
    if top <= lo:
        return np.array([top]) if top > 0 else np.array([])
    return np.geomspace(lo, top, count)


def gh_lower(a: MetricSample, b: MetricSample) -> float:
    """Certified lower bound from three invariants, each moved by at most
    twice the GH distance: diameter, radius (smallest eccentricity), and
    packing against covering numbers.  Slack and covering radii widen every
    sample value into an interval for the underlying space."""
    bounds = [0.0]
    for interval in (_diameter_interval, _radius_interval):
        lo_a, hi_a = interval(a)
        lo_b, hi_b = interval(b)
        bounds.append(0.5 * max(lo_a - hi_b, lo_b - hi_a))
    grid = eps_grid(a, b)
    bounds += [_packing_bound(a, b, grid), _packing_bound(b, a, grid)]
    return max(bounds)


def _feasible(da: np.ndarray, db: np.ndarray, bound: float) -> bool:
    """Is there f: A -> B and g: B -> A whose joint correspondence has
    distortion <= ``bound``?"""
    na, nb = len(da), len(db)
    # variables: pairs (a, f(a)) then (g(b), b)
    slots = [("a", i) for i in range(na)] + [("b", j) for j in range(nb)]
    pairs: list[tuple[int, int]] = []

    def ok(p, q):
        return abs(da[p[0], q[0]] - db[p[1], q[1]]) <= bound

    def search(k):
        if k == len(slots):
            return True
        kind, idx = slots[k]
        choices = ((idx, j) for j in range(nb)) if kind == "a" else ((i, idx) for i in range(na))
        for cand in choices:
            if all(ok(cand, p) for p in pairs) and ok(cand, cand):
                pairs.append(cand)
                if search(k + 1):
                    return True
                pairs.pop()
        return False

    return search(0)


def gh_exact_small(a, b) -> float:
    """Exact GH distance of two spaces with at most six points each.

    Accepts :class:`MetricSample` or bare matrices.  Minimal correspondences
    are unions of the graphs of maps ``A -> B`` and ``B -> A``; the optimal
    distortion is one of the numbers ``|d_a(i, j) - d_b(k, l)|``, so a binary
    search over those with a backtracking feasibility test is exact.
    """
    da = np.asarray(a.d if isinstance(a, MetricSample) else a, dtype=float)
    db = np.asarray(b.d if isinstance(b, MetricSample) else b, dtype=float)
    if len(da) > MAX_EXACT or len(db) > MAX_EXACT:
        raise ValueError(f"exact GH limited to {MAX_EXACT} points per space")
    cands = np.unique(np.abs(da.ravel()[:, None] - db.ravel()[None, :]))
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _feasible(da, db, cands[mid] + 1e-12):
            hi = mid
        else:
            lo = mid + 1
    return 0.5 * float(cands[lo])


def gh_brute_force(da, db) -> float:
    """Slow reference: every pair of maps, for the tiniest spaces only."""
    da, db = np.asarray(da, float), np.asarray(db, float)
    na, nb = len(da), len(db)
    best = math.inf
    for f in itertools.product(range(nb), repeat=na):
        for g in itertools.product(range(na), repeat=nb):
            rel = [(i, f[i]) for i in range(na)] + [(g[j], j) for j in range(nb)]
            dis = max(abs(da[p[0], q[0]] - db[p[1], q[1]]) for p in rel for q in rel)
            best = min(best, dis)
    return 0.5 * best


def gh_upper_trivial(a: MetricSample, b: MetricSample) -> float:
    """``d_GH <= max(diam) / 2`` from the all-pairs correspondence."""
    return 0.5 * max(_diameter_interval(a)[1], _diameter_interval(b)[1])


def farthest_point_sample(u: ConformalFactor, m: int,
                          graph: geodesy.GeodesicGraph | None = None) -> MetricSample:
    """Greedy farthest-point sample of ``m`` polar nodes, seeded at node 0.

    ``covering_radius`` is the largest graph distance from a polar node to
    the sample (graph distances never undershoot) plus the metric radius of
    the polar mesh cells, so it covers the whole disk.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    graph = graph or geodesy.geodesic_graph(u)
    if m > graph.n_polar:
        raise ValueError(f"m={m} exceeds the node count {graph.n_polar}")
    idx, rows, _, _ = geodesy.farthest_point_indices(graph, m)
    return _sample_from_rows(u, graph, idx, rows)


def sample_at(u: ConformalFactor, indices,
              graph: geodesy.GeodesicGraph | None = None) -> MetricSample:
    """Metric sample of ``u`` at prescribed polar nodes, e.g. the nodes of a
    farthest-point sample of another factor on the same grid."""
    graph = graph or geodesy.geodesic_graph(u)
    idx = np.asarray(indices, dtype=int)
    if idx.size < 2 or idx.max() >= graph.n_polar or idx.min() < 0:
        raise ValueError("need at least two valid polar node indices")
    return _sample_from_rows(u, graph, idx, graph.distances_from(idx))


def aligned_samples(ua: ConformalFactor, ub: ConformalFactor, m: int,
                    ) -> tuple[MetricSample, MetricSample]:
    """Farthest-point sample of ``ua`` and the same nodes measured in ``ub``."""
    if ua.grid != ub.grid:
        raise ValueError("aligned samples need a common grid")
    a = farthest_point_sample(ua, m)
    return a, sample_at(ub, a.indices)


def _sample_from_rows(u, graph, idx, rows) -> MetricSample:
    d = rows[:, idx]
    if not np.all(np.isfinite(d)):
        raise ValueError("sample is disconnected in the distance graph")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    node_cover = float(rows[:, : graph.n_polar].min(axis=0).max())
    cov = node_cover + mesh_radius(u.grid) * graph.max_eu
    return MetricSample(d, cov, u.label or "sample", graph.slack_for(float(d.max())), idx)


def mesh_radius(grid) -> float:
    """Euclidean distance from any disk point to the nearest polar node, bounded
    by half the diagonal of the outermost cell."""
    return 0.5 * math.hypot(grid.h_r, grid.h_theta)


def gh_upper_conformal(ua: ConformalFactor, ub: ConformalFactor, diam_b: float) -> float:
    """Identity-map bound for two factors on the same disk:
    ``d_a <= max(e^{u_a - u_b}) d_b`` and likewise from below, so the
    distortion of the identity is at most ``max|e^{u_a - u_b} - 1| diam_b``.

    ``diam_b`` must be an upper bound for the diameter of ``u_b``.
    """
    if ua.grid != ub.grid:
        raise ValueError("factors live on different grids")
    ratio = np.exp(ua.values - ub.values)
    lam = max(float(ratio.max()) - 1.0, 1.0 - float(ratio.min()))
    return 0.5 * lam * diam_b
