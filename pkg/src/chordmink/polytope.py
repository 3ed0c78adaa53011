"""Halfspace polytopes [z, Omega]: vertex/facet enumeration and basic geometry.

Small inputs find vertices by intersecting every n-subset of bounding
hyperplanes, which is O(N^(n+1)) but simple to make robust.  Past a budget of
C(N, n) subsets the vertices come from qhull's halfspace intersection, which
agrees to round-off and is much faster inside the solver loop.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.optimize import linprog, nnls
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

from ._tolerances import DEFAULT, MAX_VERTEX_SUBSETS
from .errors import DegenerateShapeError, InvalidMeasureError, NotInteriorError
from .measure import hemisphere_check

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HalfspaceSpec:
    """Normals Omega (N, n) and offsets z (N,) describing {x : x.v_i <= z_i}."""

    normals: np.ndarray
    offsets: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        v = np.array(self.normals, dtype=float, copy=True)
        z = np.array(self.offsets, dtype=float, copy=True).reshape(-1)
        if v.ndim != 2 or z.shape[0] != v.shape[0]:
            raise ValueError("normals and offsets have inconsistent shapes")
        if not np.all(np.isfinite(z)):
            raise ValueError("offsets must be finite")
        if self.check:
            n_half, n = v.shape
            if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > DEFAULT.unit_norm):
                raise InvalidMeasureError("normals must be unit vectors")
            if n_half < n + 1:
                raise InvalidMeasureError(f"need at least {n + 1} normals in dimension {n}")
            if not hemisphere_check(v):
                raise InvalidMeasureError(
                    "normals lie in a closed hemisphere; the intersection would be unbounded"
                )
        v.flags.writeable = False
        z.flags.writeable = False
        object.__setattr__(self, "normals", v)
        object.__setattr__(self, "offsets", z)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def size(self) -> int:
        return self.normals.shape[0]

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.offsets))))

    def with_offsets(self, z) -> "HalfspaceSpec":
        """Same normals (already validated), new offsets."""
        return HalfspaceSpec(self.normals, z, check=False)

    def translated(self, t) -> "HalfspaceSpec":
        return self.with_offsets(self.offsets + self.normals @ np.asarray(t, dtype=float))

    def scaled(self, factor: float) -> "HalfspaceSpec":
        return self.with_offsets(self.offsets * factor)


@dataclass(frozen=True)
class Facet:
    normal_index: int
    vertex_indices: np.ndarray
    area: float
    simplices: np.ndarray = field(repr=False)  # (T, n, n): T simplices of n points in R^n
    simplex_areas: np.ndarray = field(repr=False)

    @property
    def empty(self) -> bool:
        return self.area <= 0.0


@dataclass(frozen=True)
class Polytope:
    spec: HalfspaceSpec
    vertices: np.ndarray
    facets: List[Facet] = field(repr=False)
    volume: float
    interior_point: np.ndarray
    inner_radius: float
    support: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def normals(self) -> np.ndarray:
        return self.spec.normals

    @property
    def offsets(self) -> np.ndarray:
        return self.spec.offsets

    @property
    def facet_areas(self) -> np.ndarray:
        return np.array([f.area for f in self.facets])

    @property
    def nonempty(self) -> np.ndarray:
        return self.facet_areas > 0

    @property
    def surface_area(self) -> float:
        return float(math.fsum(self.facet_areas))

    @property
    def scale(self) -> float:
        return self.spec.scale

    @property
    def diameter(self) -> float:
        d = self.vertices[:, None, :] - self.vertices[None, :, :]
        return float(np.sqrt(np.max(np.sum(d * d, axis=2))))

    @property
    def minkowski_residual(self) -> float:
        """|sum_i area_i v_i|, which vanishes for closed polytopes."""
        return float(np.linalg.norm(self.facet_areas @ self.normals))

    def simplices(self):
        """All facet simplices stacked, with their facet index and area."""
        blocks = [(f.simplices, np.full(len(f.simplices), f.normal_index), f.simplex_areas)
                  for f in self.facets if not f.empty]
        return (np.concatenate([b[0] for b in blocks]), np.concatenate([b[1] for b in blocks]),
                np.concatenate([b[2] for b in blocks]))

    def boundary_cycle(self):
        """For polygons: vertex indices in counter-clockwise order and, for each
        edge (k, k+1), the index of the normal it lies on."""
        if self.dim != 2:
            raise ValueError("boundary_cycle is only defined for polygons")
        c = self.interior_point
        ang = np.arctan2(self.vertices[:, 1] - c[1], self.vertices[:, 0] - c[0])
        order = np.argsort(ang)
        nxt = np.roll(order, -1)
        mids = 0.5 * (self.vertices[order] + self.vertices[nxt])
        slack = self.offsets[None, :] - mids @ self.normals.T
        edge_facet = np.argmin(np.where(self.nonempty[None, :], slack, np.inf), axis=1)
        return order, edge_facet

    def edges(self):
        """Vertex pairs lying on at least n-1 common nonempty facets."""
        n = self.dim
        inc = np.zeros((len(self.vertices), len(self.facets)), dtype=int)
        for f in self.facets:
            if not f.empty:
                inc[f.vertex_indices, f.normal_index] = 1
        shared = inc @ inc.T
        i, j = np.nonzero(np.triu(shared >= n - 1, k=1))
        return np.stack([i, j], axis=1)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all(x @ self.normals.T <= self.offsets + tol, axis=1)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
            "vertices": self.vertices.tolist(),
            "facets": [
                {"normal_index": f.normal_index, "vertex_indices": [int(k) for k in f.vertex_indices],
                 "area": f.area}
                for f in self.facets
            ],
            "volume": self.volume,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Polytope":
        normals = np.asarray(data["normals"], dtype=float)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        return wulff_shape(HalfspaceSpec(normals, data["offsets"]))


def chebyshev_center(spec_or_polytope):
    """Center and radius of the largest ball inside {x.v_i <= z_i}."""
    spec = spec_or_polytope.spec if isinstance(spec_or_polytope, Polytope) else spec_or_polytope
    v, z = spec.normals, spec.offsets
    n = spec.dim
    norms = np.linalg.norm(v, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([v, norms[:, None]])
    bounds = [(None, None)] * n + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=z, bounds=bounds, method="highs")
    if res.status == 3:
        raise DegenerateShapeError("halfspace intersection is unbounded")
    if res.status != 0:
        raise DegenerateShapeError(f"Chebyshev-center LP failed: {res.message}")
    return res.x[:n].copy(), float(res.x[n])


def _merge_points(pts, merge_tol):
    pairs = cKDTree(pts).query_pairs(merge_tol, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(pts), len(pts)))
    n_comp, labels = connected_components(graph, directed=False)
    out = np.zeros((n_comp, pts.shape[1]))
    np.add.at(out, labels, pts)
    return out / np.bincount(labels)[:, None]


def _qhull_vertices(v, z, center, merge_tol):
    hs = HalfspaceIntersection(np.hstack([v, -z[:, None]]), center)
    return _merge_points(hs.intersections, merge_tol)


def _enumerate_vertices(v, z, tol_det, tol_feas, merge_tol):
    n_half, n = v.shape
    found = []
    combos = itertools.combinations(range(n_half), n)
    while True:
        block = np.array(list(itertools.islice(combos, 100_000)), dtype=np.intp)
        if block.size == 0:
            break
        a = v[block]
        det = np.linalg.det(a)
        ok = np.abs(det) > tol_det
        if not np.any(ok):
            continue
        x = np.linalg.solve(a[ok], z[block[ok]][..., None])[..., 0]
        feas = np.all(x @ v.T <= z + tol_feas, axis=1)
        found.append(x[feas])
    if not found:
        return np.empty((0, n))
    pts = np.concatenate(found)
    if len(pts) == 0:
        return pts
    return _merge_points(pts, merge_tol)


def _simplex_volumes(simp):
    """(k)-volumes of simplices given as (T, k+1, n) point arrays."""
    edges = simp[:, 1:, :] - simp[:, :1, :]
    k = edges.shape[1]
    gram = edges @ np.swapaxes(edges, 1, 2)
    return np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / math.factorial(k)


def _facet_geometry(pts, normal, tol):
    """Triangulate a facet given its vertex coordinates.  Returns (simplices, areas)
    or None when the vertices span less than an (n-1)-flat."""
    n = pts.shape[1]
    if len(pts) < n:
        return None
    if n == 2:
        # a segment along the tangent of the normal
        t = pts @ np.array([-normal[1], normal[0]])
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        length = float(t[hi] - t[lo])
        if length <= tol:
            return None
        return np.stack([pts[lo], pts[hi]])[None], np.array([length])
    centroid = pts.mean(axis=0)
    # orthonormal basis of the hyperplane
    _, _, vt = np.linalg.svd(normal[None, :])
    basis = vt[1:]
    local = (pts - centroid) @ basis.T
    sv = np.linalg.svd(local, compute_uv=False)
    if len(sv) < n - 1 or sv[n - 2] <= tol:
        return None
    hull = ConvexHull(local)
    ridge = pts[hull.simplices]  # (R, n-1, n)
    cen = np.broadcast_to(centroid, (ridge.shape[0], 1, n))
    simp = np.concatenate([cen, ridge], axis=1)
    areas = _simplex_volumes(simp)
    keep = areas > 0
    return simp[keep], areas[keep]


def wulff_shape(spec: HalfspaceSpec, tol=DEFAULT) -> Polytope:
    """Vertices, facets, volume and Chebyshev center of [z, Omega]."""
    v, z = spec.normals, spec.offsets
    n = spec.dim
    scale = spec.scale
    center, radius = chebyshev_center(spec)
    if radius <= tol.interior_slack * scale:
        raise DegenerateShapeError(
            f"halfspace intersection has empty interior (inner radius {radius:.3e})"
        )
    if math.comb(len(z), n) <= MAX_VERTEX_SUBSETS:
        verts = _enumerate_vertices(v, z, tol.vertex_det, tol.vertex_feasibility * scale,
                                    tol.vertex_merge * scale)
    else:
        verts = _qhull_vertices(v, z, center, tol.vertex_merge * scale)
    if len(verts) < n + 1:
        raise DegenerateShapeError("too few vertices for a full-dimensional polytope")
    proj = verts @ v.T
    support = proj.max(axis=0)
    facets = []
    inc_tol = tol.facet_incidence * scale
    for i in range(len(z)):
        idx = np.nonzero(np.abs(proj[:, i] - z[i]) <= inc_tol)[0]
        geom = _facet_geometry(verts[idx], v[i], inc_tol) if len(idx) >= n else None
        if geom is None:
            facets.append(Facet(i, idx, 0.0, np.empty((0, n, n)), np.empty(0)))
        else:
            simp, areas = geom
            facets.append(Facet(i, idx, float(math.fsum(areas)), simp, areas))
    areas = np.array([f.area for f in facets])
    heights = support - v @ center
    volume = float(math.fsum(areas * heights) / n)
    return Polytope(spec, verts, facets, volume, center, radius, support)


def polytope_from_offsets(normals, offsets, check=True) -> Polytope:
    return wulff_shape(HalfspaceSpec(normals, offsets, check=check))


def support_function(P: Polytope, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    vals = P.vertices @ np.atleast_2d(v).T
    out = vals.max(axis=0)
    return float(out[0]) if v.ndim == 1 else out


def tighten(spec: HalfspaceSpec) -> np.ndarray:
    """Offsets replaced by the support values of the polytope they define."""
    P = wulff_shape(spec)
    return np.minimum(P.support, spec.offsets)


def volume(P: Polytope) -> float:
    return P.volume


def surface_area(P: Polytope) -> float:
    return P.surface_area


def radial_function(P: Polytope, x, u) -> np.ndarray:
    """Distance from interior point ``x`` to the boundary along unit ``u`` (vectorized over u)."""
    x = np.asarray(x, dtype=float)
    slack = P.offsets - P.normals @ x
    if np.any(slack <= DEFAULT.radial_interior * P.scale):
        raise NotInteriorError("evaluation point is not strictly inside the polytope")
    u = np.asarray(u, dtype=float)
    uu = np.atleast_2d(u)
    d = uu @ P.normals.T
    with np.errstate(divide="ignore"):
        t = np.where(d > DEFAULT.radial_direction, slack[None, :] / np.where(d > 0, d, 1.0), np.inf)
    rho = t.min(axis=1)
    return float(rho[0]) if u.ndim == 1 else rho


def facet_sample(P: Polytope, i: int, count: int, seed=0) -> np.ndarray:
    """Uniform points on facet ``i``."""
    f = P.facets[i]
    if f.empty:
        raise ValueError(f"facet {i} is empty")
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(f.simplices), size=count, p=f.simplex_areas / f.simplex_areas.sum())
    bary = rng.dirichlet(np.ones(P.dim), size=count)
    return np.einsum("ck,ckn->cn", bary, f.simplices[pick])


def translate(P: Polytope, t) -> Polytope:
    return wulff_shape(P.spec.translated(t))


def dilate(P: Polytope, factor: float) -> Polytope:
    return wulff_shape(P.spec.scaled(factor))


def _point_polytope_distance(x, verts):
    scale = max(1.0, float(np.abs(verts).max()))
    big = 1e4 * scale
    a = np.vstack([verts.T, big * np.ones(len(verts))])
    b = np.append(x, big)
    lam, _ = nnls(a, b)
    return float(np.linalg.norm(verts.T @ lam - x))


def hausdorff_distance(P: Polytope, Q: Polytope) -> float:
    """Hausdorff distance; attained at a vertex of one of the two polytopes."""
    d1 = max(_point_polytope_distance(x, Q.vertices) for x in P.vertices)
    d2 = max(_point_polytope_distance(x, P.vertices) for x in Q.vertices)
    return max(d1, d2)


def regular_polygon_normals(k: int, phase: float = 0.0) -> np.ndarray:
    a = phase + 2 * np.pi * np.arange(k) / k
    return np.stack([np.cos(a), np.sin(a)], axis=1)


def cube_normals(n: int = 3) -> np.ndarray:
    eye = np.eye(n)
    return np.concatenate([eye, -eye])


def random_normals(rng, count: int, n: int) -> np.ndarray:
    """Random unit normals that are not concentrated in a closed hemisphere."""
    for _ in range(1000):
        v = rng.standard_normal((count, n))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if hemisphere_check(v):
            return v
    raise RuntimeError("could not draw admissible random normals")


def random_polytope(rng, count: int, n: int, spread: float = 0.3) -> Polytope:
    """Random polytope with ``count`` normals around the unit ball, all facets nonempty."""
    for _ in range(1000):
        v = random_normals(rng, count, n)
        z = 1.0 + spread * rng.random(count)
        try:
            spec = HalfspaceSpec(v, z)
            P = wulff_shape(spec)
        except DegenerateShapeError:
            continue
        if np.all(P.nonempty):
            return P
        # drop redundant normals rather than resampling
        keep = P.nonempty
        if keep.sum() >= n + 1:
            try:
                return wulff_shape(HalfspaceSpec(v[keep], P.support[keep]))
            except (DegenerateShapeError, InvalidMeasureError):
                continue
    raise RuntimeError("could not draw a random polytope")
