"""Geodesic distances of conformal disk metrics by graph shortest paths.

The graph has two kinds of vertices: a Cartesian lattice of spacing
``1 / n_cart`` inside the disk, joined by a 16-neighbour stencil (knight
moves included), and every node of the polar grid, attached by straight
segments to its nearby lattice points.  An edge is a straight segment in
the convex disk, weighted by its metric length ``int exp(u) ds`` (Simpson's
rule with ``u`` interpolated at the midpoint), so every graph path is a
genuine curve and graph distances never undershoot the true ones.  The
overshoot is bounded by the stencil's metrication constant times the
distance plus the lattice spacing; that bound is carried as ``slack``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from . import polar_grid as pg
from .conformal_metric import ConformalFactor
from .model_cap import model_factor

STENCILS = {
    1: [(1, 0), (0, 1), (1, 1), (1, -1)],
    2: [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2)],
    3: [(1, 0), (0, 1), (1, 1), (1, -1), (2, 1), (1, 2), (2, -1), (1, -2),
        (3, 1), (1, 3), (3, -1), (1, -3), (3, 2), (2, 3), (3, -2), (2, -3)],
}


def metrication_constant(order: int) -> float:
    """Worst relative overestimate of straight-line length by stencil paths:
    ``1 / cos(gap / 2) - 1`` for the widest angular gap between directions."""
    angles = sorted({math.atan2(abs(b), abs(a)) for a, b in STENCILS[order]})
    gap = max(b - a for a, b in zip(angles, angles[1:]))
    return 1.0 / math.cos(gap / 2) - 1.0


def default_n_cart(grid) -> int:
    """Lattice resolution matched to the polar grid, capped for memory."""
    return min(grid.nr, 128)


class GeodesicGraph:
    """Weighted graph approximating ``(closed unit disk, exp(2u) g_euc)``."""

    def __init__(self, u: ConformalFactor, n_cart: int | None = None, order: int = 2):
        if n_cart is None:
            n_cart = default_n_cart(u.grid)
        self.u = u
        self.grid = u.grid
        self.n_cart = n_cart
        self.order = order
        self.spacing = 1.0 / n_cart
        self.c_graph = metrication_constant(order)
        g = self.grid
        polar_xy = np.stack([g.x.ravel(), g.y.ravel()], axis=1)
        a = np.arange(-n_cart, n_cart + 1)
        ii, jj = np.meshgrid(a, a, indexing="ij")
        inside = ii**2 + jj**2 < n_cart**2
        lattice = -np.ones(ii.shape, dtype=int)
        n_polar = len(polar_xy)
        lattice[inside] = n_polar + np.arange(inside.sum())
        cart_xy = np.stack([ii[inside], jj[inside]], axis=1) * self.spacing
        self.n_polar = n_polar
        self.xy = np.vstack([polar_xy, cart_xy])
        self.n_vertices = len(self.xy)

        heads, tails = [], []
        for di, dj in STENCILS[order]:
            src = lattice[max(0, -di): lattice.shape[0] - max(0, di),
                          max(0, -dj): lattice.shape[1] - max(0, dj)]
            dst = lattice[max(0, di): lattice.shape[0] + min(0, di) or None,
                          max(0, dj): lattice.shape[1] + min(0, dj) or None]
            ok = (src >= 0) & (dst >= 0)
            heads.append(src[ok])
            tails.append(dst[ok])
        tree = cKDTree(cart_xy)
        attach = tree.query_ball_point(polar_xy, 1.5 * self.spacing * math.sqrt(2))
        for p, near in enumerate(attach):
            if len(near) < 3:
                near = tree.query(polar_xy[p], k=4)[1].tolist()
            heads.append(np.full(len(near), p))
            tails.append(np.asarray(near) + n_polar)
        head = np.concatenate(heads)
        tail = np.concatenate(tails)
        self.n_edges = len(head)

        eu_vertex = np.exp(self._u_at(self.xy))
        mid = 0.5 * (self.xy[head] + self.xy[tail])
        eu_mid = np.exp(self._u_at(mid))
        length = np.linalg.norm(self.xy[head] - self.xy[tail], axis=1)
        weight = length * (eu_vertex[head] + 4 * eu_mid + eu_vertex[tail]) / 6
        weight = np.maximum(weight, 1e-15)  # csgraph drops explicit zeros
        self.matrix = sp.csr_matrix((weight, (head, tail)),
                                    shape=(self.n_vertices, self.n_vertices))
        self.max_eu = float(max(eu_vertex.max(), eu_mid.max()))

    def _u_at(self, xy: np.ndarray) -> np.ndarray:
        r = np.hypot(xy[:, 0], xy[:, 1])
        scale = np.where(r > 1, 1 / np.maximum(r, 1e-300), 1.0)
        return pg.interpolate(self.u.field, xy[:, 0] * scale, xy[:, 1] * scale)

    @property
    def additive_slack(self) -> float:
        """Overshoot from attaching endpoints and resolving paths on the lattice."""
        return 3.0 * self.spacing * self.max_eu

    def slack_for(self, distance: float) -> float:
        """Certified bound on ``d_graph - d_true`` for pairs at graph distance
        ``distance``."""
        return self.c_graph * distance + self.additive_slack

    def vertex_at(self, x: float, y: float) -> int:
        return int(np.argmin(np.hypot(self.xy[:, 0] - x, self.xy[:, 1] - y)))

    @cached_property
    def boundary_nodes(self) -> np.ndarray:
        g = self.grid
        return np.arange(g.nr * g.ntheta, g.size)

    def distances_from(self, sources, limit: float = np.inf) -> np.ndarray:
        """Rows of graph distances from each source to every vertex."""
        return dijkstra(self.matrix, directed=False, indices=np.atleast_1d(sources),
                        limit=limit)

    def distance_to_set(self, sources) -> np.ndarray:
        return dijkstra(self.matrix, directed=False, indices=np.asarray(sources),
                        min_only=True)


_GRAPH_CACHE: dict = {}


def geodesic_graph(u: ConformalFactor, n_cart: int | None = None,
                   order: int = 2) -> GeodesicGraph:
    """Build (or reuse, keyed on object identity) the graph of ``u``."""
    if n_cart is None:
        n_cart = default_n_cart(u.grid)
    key = (id(u), n_cart, order)
    hit = _GRAPH_CACHE.get(key)
    if hit is not None and hit.u is u:
        return hit
    if len(_GRAPH_CACHE) > 8:
        _GRAPH_CACHE.clear()
    graph = GeodesicGraph(u, n_cart, order)
    _GRAPH_CACHE[key] = graph
    return graph


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    indices: np.ndarray
    d: np.ndarray
    slack: float

    def to_dict(self) -> dict:
        return {"indices": [int(i) for i in self.indices],
                "d": self.d.ravel().tolist(), "slack": self.slack}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "DistanceMatrix":
        idx = np.asarray(data["indices"], dtype=int)
        n = len(idx)
        return cls(idx, np.asarray(data["d"], dtype=float).reshape(n, n), float(data["slack"]))


def distance_matrix(u: ConformalFactor, sample, graph: GeodesicGraph | None = None,
                    ) -> DistanceMatrix:
    """Pairwise geodesic distances between graph vertices ``sample``.

    Polar-grid node ``k`` is graph vertex ``k``; lattice points follow.
    """
    sample = np.asarray(sample, dtype=int)
    if sample.size == 0:
        raise ValueError("sample must be non-empty")
    graph = graph or geodesic_graph(u)
    rows = graph.distances_from(sample)
    d = rows[:, sample]
    if not np.all(np.isfinite(d)):
        raise ValueError("sample is disconnected in the distance graph")
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(sample, d, graph.slack_for(float(d.max())))


def inradius(u: ConformalFactor, graph: GeodesicGraph | None = None) -> tuple[float, int]:
    """Largest distance to the boundary circle over interior polar nodes.

    Returns ``(value, node)``.  Graph distances overshoot, so the value is an
    upper estimate within ``graph.slack_for(value)``.
    """
    graph = graph or geodesic_graph(u)
    dist = graph.distance_to_set(graph.boundary_nodes)[: graph.n_polar]
    interior = dist[: graph.grid.n_interior]
    node = int(np.argmax(interior))
    return float(interior[node]), node


def farthest_point_indices(graph: GeodesicGraph, m: int, seed_node: int = 0):
    """Greedy farthest-point selection among polar nodes.

    Returns ``(indices, rows, insertion_distances, cover)`` where ``rows``
    holds the graph distances from each chosen node to every vertex and
    ``cover`` is the max over all graph vertices of the distance to the
    chosen set.
    """
    n = graph.n_polar
    if m < 1 or m > n:
        raise ValueError(f"m must lie in [1, {n}], got {m}")
    chosen = [seed_node]
    rows = [graph.distances_from(seed_node)[0]]
    nearest = rows[0].copy()
    insert = [0.0]
    for _ in range(1, m):
        cand = nearest[:n].copy()
        cand[chosen] = -1.0
        nxt = int(np.argmax(cand))  # first index wins ties
        insert.append(float(nearest[nxt]))
        chosen.append(nxt)
        row = graph.distances_from(nxt)[0]
        rows.append(row)
        np.minimum(nearest, row, out=nearest)
    return np.asarray(chosen), np.vstack(rows), np.asarray(insert), float(nearest.max())


def diameter(u: ConformalFactor, m: int = 64, graph: GeodesicGraph | None = None) -> float:
    """Max pairwise distance over a farthest-point sample of ``m`` nodes."""
    graph = graph or geodesic_graph(u)
    idx, rows, _, _ = farthest_point_indices(graph, m)
    return float(rows[:, idx].max())


def ball_volume(u: ConformalFactor, center: int, s: float,
                graph: GeodesicGraph | None = None) -> float:
    """Metric area of the polar cells whose node lies within graph distance
    ``s`` of vertex ``center`` (whole cells, no partial-cell correction)."""
    if not 0 < s < math.pi:
        raise ValueError(f"s must lie in (0, pi), got {s}")
    graph = graph or geodesic_graph(u)
    dist = graph.distances_from(center, limit=s * (1 + 1e-12))[0, : graph.n_polar]
    inside = (dist <= s).reshape(graph.grid.shape)
    weights = graph.grid.area_weights * np.exp(2 * u.values)
    return math.fsum(weights[inside].tolist())


def volume_comparison_check(u: ConformalFactor, c: float, centers, radii,
                            n_cart: int | None = None) -> list[dict]:
    """Margins ``vol_u(B_s(x)) - vol_rho_c(B_s(x))`` for every center/radius.

    ``centers`` are polar-grid node indices, shared by both metrics.
    """
    model = ConformalFactor(model_factor(c, u.grid), c, label="model")
    gu = geodesic_graph(u, n_cart)
    gm = geodesic_graph(model, n_cart)
    out = []
    for x in centers:
        for s in radii:
            vu = ball_volume(u, int(x), s, gu)
            vm = ball_volume(model, int(x), s, gm)
            out.append({"center": int(x), "s": float(s), "vol_u": vu, "vol_model": vm,
                        "margin": vu - vm})
    return out
