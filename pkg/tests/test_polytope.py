import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chordmink.errors import DegenerateShapeError, InvalidMeasureError, NotInteriorError
from chordmink.polytope import (HalfspaceSpec, Polytope, chebyshev_center, cube_normals, dilate,
                                facet_sample, hausdorff_distance, polytope_from_offsets,
                                radial_function, random_normals, random_polytope,
                                regular_polygon_normals, support_function, surface_area, tighten,
                                translate, volume, wulff_shape)
from chordmink.polytope import _enumerate_vertices, _qhull_vertices

SQ = cube_normals(2)  # e1, e2, -e1, -e2

seeds = st.integers(0, 10**6)


def brute_vertices(normals, offsets):
    """Oracle: every feasible intersection point of n hyperplanes."""
    n = normals.shape[1]
    pts = []
    for idx in itertools.combinations(range(len(offsets)), n):
        a = normals[list(idx)]
        if abs(np.linalg.det(a)) < 1e-10:
            continue
        x = np.linalg.solve(a, offsets[list(idx)])
        if np.all(normals @ x <= offsets + 1e-9):
            pts.append(x)
    return np.array(pts)


# ---------------------------------------------------------------------------
# construction examples

def test_square(square):
    assert square.volume == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(square.facet_areas, [2, 2, 2, 2], atol=1e-12)
    got = sorted(map(tuple, np.round(square.vertices, 12)))
    assert got == [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def test_cube(cube):
    assert cube.volume == pytest.approx(8.0, abs=1e-12)
    np.testing.assert_allclose(cube.facet_areas, 4.0, atol=1e-12)
    assert len(cube.vertices) == 8
    assert surface_area(cube) == pytest.approx(24.0, abs=1e-12)


def test_unit_square(unit_square):
    assert volume(unit_square) == pytest.approx(1.0, abs=1e-12)
    assert surface_area(unit_square) == pytest.approx(4.0, abs=1e-12)


def test_empty_interior_rejected():
    with pytest.raises(DegenerateShapeError):
        wulff_shape(HalfspaceSpec(SQ, [1.0, 1.0, 1.0, -2.0]))


def test_unbounded_rejected():
    with pytest.raises((InvalidMeasureError, DegenerateShapeError)):
        wulff_shape(HalfspaceSpec(np.array([[1.0, 0], [0, 1.0], [-1.0, 0]]), [1.0, 1.0, 1.0]))


def test_spec_validation():
    with pytest.raises(InvalidMeasureError):
        HalfspaceSpec(np.array([[2.0, 0], [0, 1], [-1, 0]]), [1, 1, 1])
    with pytest.raises(InvalidMeasureError):
        HalfspaceSpec(np.array([[1.0, 0], [0, 1]]), [1, 1])


def test_empty_facet_reported():
    # the diagonal constraint only touches the corner (1, 1)
    normals = np.vstack([SQ, [1 / math.sqrt(2), 1 / math.sqrt(2)]])
    P = wulff_shape(HalfspaceSpec(normals, [1, 1, 1, 1, math.sqrt(2)]))
    assert P.facet_areas[4] == 0.0
    assert not P.nonempty[4]
    assert P.volume == pytest.approx(4.0)


def test_large_normal_sets_use_qhull():
    normals = regular_polygon_normals(128)
    normals3 = random_normals(np.random.default_rng(0), 250, 3)
    P2 = wulff_shape(HalfspaceSpec(normals, np.ones(128)))
    assert P2.volume == pytest.approx(128 * math.tan(math.pi / 128), rel=1e-12)
    P3 = wulff_shape(HalfspaceSpec(normals3, np.ones(250)))
    assert P3.minkowski_residual < 1e-7
    assert np.all(P3.vertices @ normals3.T <= 1 + 1e-9)


def _same_points(a, b):
    d = np.linalg.norm(a[:, None] - b[None], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


@pytest.mark.parametrize("n,count", [(2, 12), (2, 60), (3, 10), (3, 25)])
def test_qhull_matches_brute_force(n, count):
    rng = np.random.default_rng(count)
    v = random_normals(rng, count, n)
    z = rng.uniform(0.8, 1.2, count)
    center, _ = chebyshev_center(HalfspaceSpec(v, z))
    a = _enumerate_vertices(v, z, 1e-12, 1e-10, 1e-9)
    b = _qhull_vertices(v, z, center, 1e-9)
    assert len(a) == len(b)
    assert _same_points(a, b) < 1e-12


def test_qhull_merges_degenerate_vertices():
    # octahedron normals: four planes meet at each vertex of the cube-like shape
    v = np.array(list(itertools.product([-1, 1], repeat=3)), dtype=float) / math.sqrt(3)
    z = np.ones(8) / math.sqrt(3)
    center, _ = chebyshev_center(HalfspaceSpec(v, z))
    verts = _qhull_vertices(v, z, center, 1e-9)
    expected = np.vstack([np.eye(3), -np.eye(3)])
    assert len(verts) == 6 and _same_points(verts, expected) < 1e-12


def test_json_round_trip(cube):
    back = Polytope.from_json(cube.to_json())
    assert back.volume == pytest.approx(cube.volume)
    np.testing.assert_allclose(back.offsets, cube.offsets)


# ---------------------------------------------------------------------------
# support, tighten, radial, chebyshev

def test_support_function_examples(square):
    assert support_function(square, [1.0, 0.0]) == pytest.approx(1.0)
    assert support_function(square, [1 / math.sqrt(2), 1 / math.sqrt(2)]) == pytest.approx(math.sqrt(2))


@given(seeds)
def test_support_translation_identity(seed):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, 7, 2)
    xi = 0.1 * rng.standard_normal(2)
    v = rng.standard_normal((5, 2))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    Q = translate(P, -xi)
    np.testing.assert_allclose(support_function(Q, v), support_function(P, v) - v @ xi, atol=1e-12)


def test_tighten_all_active():
    np.testing.assert_allclose(tighten(HalfspaceSpec(SQ, np.ones(4))), np.ones(4))


def test_tighten_slack_constraint():
    # with only four normals every constraint bounds the shape, so a slack one
    # needs an extra normal: x + y <= 5 sits well outside the square
    d = np.array([[1.0, 1.0]]) / math.sqrt(2)
    z = tighten(HalfspaceSpec(np.vstack([SQ, d]), [1, 1, 1, 1, 5]))
    np.testing.assert_allclose(z, [1, 1, 1, 1, math.sqrt(2)], atol=1e-12)


def test_tighten_four_normals_keeps_only_bound():
    # -y <= 5 is the only lower bound on y, so it stays active
    np.testing.assert_allclose(tighten(HalfspaceSpec(SQ, [1, 1, 1, 5])), [1, 1, 1, 5])


def test_tighten_matches_vertex_max():
    rng = np.random.default_rng(11)
    normals = random_normals(rng, 12, 3)
    z = rng.uniform(0.8, 1.5, 12)
    verts = brute_vertices(normals, z)
    np.testing.assert_allclose(tighten(HalfspaceSpec(normals, z)), np.max(verts @ normals.T, axis=0),
                               atol=1e-9)


@pytest.mark.parametrize("x, u, expected", [
    ([0, 0], [1, 0], 1.0),
    ([0, 0], [1 / math.sqrt(2), 1 / math.sqrt(2)], math.sqrt(2)),
])
def test_radial_examples_square(square, x, u, expected):
    assert radial_function(square, x, u) == pytest.approx(expected)


def test_radial_example_cube(cube):
    assert radial_function(cube, [0.5, 0, 0], [1.0, 0, 0]) == pytest.approx(0.5)


def test_radial_requires_interior(square):
    with pytest.raises(NotInteriorError):
        radial_function(square, [1.0, 0.0], [1.0, 0.0])


def test_chebyshev_examples(square):
    c, r = chebyshev_center(square)
    np.testing.assert_allclose(c, 0, atol=1e-12)
    assert r == pytest.approx(1.0)
    cube01 = HalfspaceSpec(cube_normals(3), [1, 1, 1, 0, 0, 0])
    c, r = chebyshev_center(cube01)
    np.testing.assert_allclose(c, 0.5, atol=1e-9)
    assert r == pytest.approx(0.5)


# ---------------------------------------------------------------------------
# invariants on random polytopes

@given(seeds, st.sampled_from([2, 3]))
def test_construction_invariants(seed, n):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, 6 if n == 2 else 9, n)
    scale = max(1.0, float(np.max(np.abs(P.offsets))))
    # vertices are feasible
    assert np.all(P.vertices @ P.normals.T <= P.offsets + 1e-9 * scale)
    # vertex set matches the brute-force oracle
    oracle = brute_vertices(P.normals, P.offsets)
    assert hausdorff_points(P.vertices, oracle) < 1e-9 * scale
    for f in P.facets:
        if f.empty:
            continue
        x = P.vertices[f.vertex_indices]
        np.testing.assert_allclose(x @ P.normals[f.normal_index], P.support[f.normal_index],
                                   atol=1e-9 * scale)
    assert np.all(P.facet_areas >= 0) and P.volume > 0
    assert P.minkowski_residual < 1e-7 * max(1.0, P.surface_area)
    # c, r from the LP: the ball touches no constraint closer than r
    c, r = chebyshev_center(P)
    assert np.all(P.offsets - P.normals @ c >= r - 1e-9)


def hausdorff_points(a, b):
    d = np.linalg.norm(a[:, None] - b[None], axis=2)
    return max(d.min(axis=1).max(), d.min(axis=0).max())


@given(seeds, st.sampled_from([2, 3]))
def test_wulff_of_tighten_is_same_shape(seed, n):
    rng = np.random.default_rng(seed)
    normals = random_normals(rng, 8, n)
    z = rng.uniform(0.7, 1.6, 8)
    P = wulff_shape(HalfspaceSpec(normals, z))
    Q = wulff_shape(HalfspaceSpec(normals, tighten(HalfspaceSpec(normals, z))))
    assert hausdorff_points(P.vertices, Q.vertices) < 1e-9


@given(seeds, st.sampled_from([2, 3]))
def test_radial_points_land_on_boundary(seed, n):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, 8, n)
    u = rng.standard_normal((50, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    for x in P.interior_point + 0.3 * P.inner_radius * u[:3]:
        y = x + radial_function(P, x, u)[:, None] * u
        slack = P.offsets[None, :] - y @ P.normals.T
        assert np.all(slack >= -1e-9)
        assert np.all(np.min(slack, axis=1) <= 1e-9)


@given(seeds, st.floats(0.2, 5.0))
def test_scaling(seed, t):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, 9, 3)
    Q = dilate(P, t)
    assert Q.volume == pytest.approx(t**3 * P.volume, rel=1e-10)
    v = random_normals(rng, 4, 3)
    np.testing.assert_allclose(support_function(Q, v), t * support_function(P, v), rtol=1e-10)


@given(seeds)
def test_translation_preserves_volume_and_area(seed):
    rng = np.random.default_rng(seed)
    P = random_polytope(rng, 9, 3)
    Q = translate(P, 0.2 * rng.standard_normal(3))
    assert Q.volume == pytest.approx(P.volume, rel=1e-10)
    assert Q.surface_area == pytest.approx(P.surface_area, rel=1e-10)


def test_hausdorff_distance(square):
    assert hausdorff_distance(square, square) == pytest.approx(0.0, abs=1e-10)
    assert hausdorff_distance(square, dilate(square, 1.5)) == pytest.approx(0.5 * math.sqrt(2), rel=1e-6)


def test_polytope_from_offsets():
    P = polytope_from_offsets(regular_polygon_normals(6), np.ones(6))
    assert P.volume == pytest.approx(6 * math.tan(math.pi / 6), rel=1e-12)


# ---------------------------------------------------------------------------
# facet sampling

def test_facet_sample_square_facet_mean(cube):
    x = facet_sample(cube, 0, 10**4, seed=1)
    np.testing.assert_allclose(x[:, 0], 1.0, atol=1e-12)
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(len(x))
    assert np.all(np.abs(mean[1:]) < 3 * se[1:] + 1e-15)


def test_facet_sample_segment_collinear(square):
    x = facet_sample(square, 1, 1000, seed=2)
    np.testing.assert_allclose(x[:, 1], 1.0, atol=1e-12)
    assert np.all(np.abs(x[:, 0]) <= 1.0 + 1e-12)


def test_facet_sample_triangle_area_ratios():
    # corner of the cube cut by a diagonal plane gives a triangular facet
    d = np.ones(3) / math.sqrt(3)
    P = wulff_shape(HalfspaceSpec(np.vstack([cube_normals(3), d]), [1, 1, 1, 1, 1, 1, 2.5 / math.sqrt(3)]))
    i = 6
    f = P.facets[i]
    assert len(f.vertex_indices) == 3
    a, b, c = P.vertices[f.vertex_indices]
    count = 40000
    x = facet_sample(P, i, count, seed=3)
    # split at the centroid into three sub-triangles of equal area
    g = (a + b + c) / 3
    tris = [(a, b, g), (b, c, g), (c, a, g)]
    hits = np.zeros(3)
    for k, (p0, p1, p2) in enumerate(tris):
        m = np.stack([p1 - p0, p2 - p0], axis=1)
        coef, *_ = np.linalg.lstsq(m, (x - p0).T, rcond=None)
        hits[k] = np.sum((coef[0] >= -1e-12) & (coef[1] >= -1e-12) & (coef.sum(axis=0) <= 1 + 1e-12))
    p = 1 / 3
    se = math.sqrt(p * (1 - p) / count)
    assert np.all(np.abs(hits / count - p) < 4 * se)
