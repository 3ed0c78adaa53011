"""Deterministic line quadrature for chord integrals of polytopes.

For a fixed direction u, lines parallel to u are indexed by y in u^perp and
J_u = int |P cap l_y|^q dy.  The chord length is affine on the cells of an
arrangement in u^perp (slabs for polygons, trapezoids for 3-polytopes), so
the inner integral is done in closed form.  The outer integral over
directions uses Gauss-Legendre on smooth arcs (n = 2) or a rotated Lebedev
rule (n = 3).  Derivatives of J_u with respect to the offsets are exact for
each direction, so the chord measure produced here is the exact gradient
of the discrete chord integral.
"""
import math
from functools import lru_cache

import numpy as np
from scipy.integrate import lebedev_rule
from scipy.spatial.transform import Rotation


# chord lengths below this (relative to the polytope scale) are roundoff
ZERO_LENGTH = 1e-11


@lru_cache(maxsize=None)
def _gl01(k):
    x, w = np.polynomial.legendre.leggauss(k)
    return (x + 1) / 2, w / 2


def mean_power_segment(lo, hi, r):
    """Average of (lo + (hi - lo) s)^r over s in [0, 1], elementwise; lo, hi >= 0, r > -1."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a = np.minimum(lo, hi)
    b = np.maximum(lo, hi)
    out = np.zeros(np.broadcast(a, b).shape)
    a, b = np.broadcast_to(a, out.shape), np.broadcast_to(b, out.shape)
    diff = b - a
    closed = (a <= 0.9 * b) & (b > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (b ** (r + 1) - a ** (r + 1)) / ((r + 1) * diff)
    out[closed] = vals[closed]
    near = ~closed & (b > 0)
    if np.any(near):
        s, w = _gl01(12)
        pts = a[near][:, None] + diff[near][:, None] * s[None, :]
        out[near] = (pts**r) @ w
    return out


def mean_power_triangle(f, r):
    """Average of g^r over a triangle where g is affine with vertex values ``f`` (..., 3) >= 0."""
    f = np.sort(np.clip(np.asarray(f, dtype=float), 0.0, None), axis=-1)
    lo, mid, hi = f[..., 0], f[..., 1], f[..., 2]
    span = hi - lo
    out = np.zeros(lo.shape)
    tiny = span <= 1e-14 * np.maximum(hi, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        flat = np.where(hi > 0, hi, 1.0) ** r
    out[tiny] = np.where(hi[tiny] > 0, flat[tiny], 0.0)
    rest = ~tiny
    if not np.any(rest):
        return out
    lo, mid, hi, span = lo[rest], mid[rest], hi[rest], span[rest]
    d = mid - lo
    e = hi - mid
    w1 = d / span
    w2 = e / span
    s, w = _gl01(12)
    e1 = np.zeros(lo.shape)
    m1 = d > 0
    if np.any(m1):
        lo1, mid1, d1 = lo[m1], mid[m1], d[m1]
        closed = lo1 <= 0.9 * mid1
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 2.0 / d1**2 * ((mid1 ** (r + 2) - lo1 ** (r + 2)) / (r + 2)
                                 - lo1 * (mid1 ** (r + 1) - lo1 ** (r + 1)) / (r + 1))
            gl = ((lo1[:, None] + d1[:, None] * s[None, :]) ** r * 2 * s[None, :]) @ w
        e1[m1] = np.where(closed, val, gl)
    e2 = np.zeros(lo.shape)
    m2 = e > 0
    if np.any(m2):
        mid2, hi2, e_2 = mid[m2], hi[m2], e[m2]
        closed = mid2 <= 0.9 * hi2
        with np.errstate(divide="ignore", invalid="ignore"):
            val = 2.0 / e_2**2 * (hi2 * (hi2 ** (r + 1) - mid2 ** (r + 1)) / (r + 1)
                                  - (hi2 ** (r + 2) - mid2 ** (r + 2)) / (r + 2))
            # density on [mid, hi] is 2 (hi - f) / e^2; substitute f = hi - e s
            gl = ((hi2[:, None] - e_2[:, None] * s[None, :]) ** r * 2 * s[None, :]) @ w
        e2[m2] = np.where(closed, val, gl)
    out[rest] = w1 * e1 + w2 * e2
    return out


# ---------------------------------------------------------------------------
# per-direction integrals

def _polygon_lines(P, thetas, q, want_grad):
    """J(theta) and dJ/dz for a polygon, for each angle in ``thetas``."""
    order, edge_facet = P.boundary_cycle()
    verts = P.vertices[order]
    normals = P.normals[edge_facet]
    offsets = P.support[edge_facet]
    n_facets = len(P.facets)
    u = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)  # (T, 2)
    w = np.stack([-np.sin(thetas), np.cos(thetas)], axis=1)
    y = w @ verts.T  # (T, V)
    d = u @ normals.T  # (T, E)
    c = w @ normals.T
    ys = np.sort(y, axis=1)
    lo_y, hi_y = ys[:, :-1], ys[:, 1:]
    mid = 0.5 * (lo_y + hi_y)  # (T, S)
    y0 = y
    y1 = np.roll(y, -1, axis=1)
    emin = np.minimum(y0, y1)[:, None, :]
    emax = np.maximum(y0, y1)[:, None, :]
    spans = (emin < mid[:, :, None]) & (mid[:, :, None] < emax)  # (T, S, E)
    dd = d[:, None, :]
    exit_mask = spans & (dd > 0)
    entry_mask = spans & (dd < 0)
    valid = exit_mask.any(axis=2) & entry_mask.any(axis=2) & (hi_y > lo_y)
    b = np.argmax(exit_mask, axis=2)
    a = np.argmax(entry_mask, axis=2)
    tt = np.arange(len(thetas))[:, None]

    def length(yy):
        return ((offsets[b] - yy * c[tt, b]) / d[tt, b]
                - (offsets[a] - yy * c[tt, a]) / d[tt, a])

    la = np.clip(length(lo_y), 0.0, None)
    lb = np.clip(length(hi_y), 0.0, None)
    # the extreme vertices have chord length exactly 0; a roundoff residue r
    # there would leak r^q into the q - 1 < 0 gradient kernel
    la[:, 0] = 0.0
    lb[:, -1] = 0.0
    floor = ZERO_LENGTH * P.scale
    la[la < floor] = 0.0
    lb[lb < floor] = 0.0
    width = np.where(valid, hi_y - lo_y, 0.0)
    if q == 0:
        J = width.sum(axis=1)
    else:
        J = (width * mean_power_segment(la, lb, q)).sum(axis=1)
    if not want_grad:
        return J, None
    grad = np.zeros((len(thetas), n_facets))
    if q > 0:
        m = q * width * mean_power_segment(la, lb, q - 1.0)
        gb = m / d[tt, b]
        ga = m / -d[tt, a]
        rows = np.broadcast_to(tt, b.shape)
        np.add.at(grad, (rows, edge_facet[b]), gb)
        np.add.at(grad, (rows, edge_facet[a]), ga)
    return J, grad


def _polytope3_cells(P, edges, u):
    """Triangles of u^perp on which the chord length is affine, for a 3-polytope.

    Returns (areas, corner lengths, exit facet, entry facet, dL/dz_exit, dL/dz_entry).
    """
    scale = P.scale
    _, _, vt = np.linalg.svd(u[None, :])
    basis = vt[1:]  # (2, 3) orthonormal basis of u^perp
    Y = P.vertices @ basis.T
    normals, offsets = P.normals, P.support
    d = normals @ u
    W = normals @ basis.T
    usable = P.nonempty & (np.abs(d) > 1e-12)
    exit_f = np.nonzero(usable & (d > 0))[0]
    entry_f = np.nonzero(usable & (d < 0))[0]
    p0, p1 = Y[edges[:, 0]], Y[edges[:, 1]]
    swap = p0[:, 0] > p1[:, 0]
    a = np.where(swap[:, None], p1, p0)
    b = np.where(swap[:, None], p0, p1)
    dx = b[:, 0] - a[:, 0]
    eps = 1e-12 * scale
    keep = dx > eps
    a, b, dx = a[keep], b[keep], dx[keep]
    slope = (b[:, 1] - a[:, 1]) / dx
    # proper crossings of projected edges add breakpoints
    xs = [Y[:, 0]]
    if len(a) > 1:
        i, j = np.triu_indices(len(a), k=1)
        den = slope[i] - slope[j]
        ok = np.abs(den) > 1e-14
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = (a[j, 1] - slope[j] * a[j, 0] - a[i, 1] + slope[i] * a[i, 0]) / den
        lo = np.maximum(a[i, 0], a[j, 0])
        hi = np.minimum(b[i, 0], b[j, 0])
        ok &= (xc > lo + eps) & (xc < hi - eps)
        xs.append(xc[ok])
    xs = np.sort(np.concatenate(xs))
    xs = xs[np.concatenate([[True], np.diff(xs) > eps])]
    xl, xr = xs[:-1], xs[1:]
    xm = 0.5 * (xl + xr)
    span = (a[None, :, 0] < xm[:, None]) & (b[None, :, 0] > xm[:, None])  # (S, E)

    def y_at(x):
        return a[None, :, 1] + slope[None, :] * (x[:, None] - a[None, :, 0])

    ym = np.where(span, y_at(xm), np.inf)
    order = np.argsort(ym, axis=1)
    cnt = span.sum(axis=1)
    yl = np.take_along_axis(y_at(xl), order, axis=1)
    yr = np.take_along_axis(y_at(xr), order, axis=1)
    k = np.arange(span.shape[1] - 1)[None, :]
    pair = k < (cnt[:, None] - 1)
    s_idx, k_idx = np.nonzero(pair)
    if s_idx.size == 0:
        empty = np.empty(0, dtype=int)
        return np.empty(0), np.empty((0, 3)), empty, empty, np.empty(0), np.empty(0)
    c0 = np.stack([xl[s_idx], yl[s_idx, k_idx]], axis=1)
    c1 = np.stack([xr[s_idx], yr[s_idx, k_idx]], axis=1)
    c2 = np.stack([xr[s_idx], yr[s_idx, k_idx + 1]], axis=1)
    c3 = np.stack([xl[s_idx], yl[s_idx, k_idx + 1]], axis=1)
    cen = 0.25 * (c0 + c1 + c2 + c3)
    # entry/exit facets at the trapezoid centroid
    t_exit = (offsets[exit_f][None, :] - cen @ W[exit_f].T) / d[exit_f][None, :]
    t_entry = (offsets[entry_f][None, :] - cen @ W[entry_f].T) / d[entry_f][None, :]
    fb = exit_f[np.argmin(t_exit, axis=1)]
    fa = entry_f[np.argmax(t_entry, axis=1)]

    def length(pt):
        return ((offsets[fb] - np.sum(pt * W[fb], axis=1)) / d[fb]
                - (offsets[fa] - np.sum(pt * W[fa], axis=1)) / d[fa])

    L = np.clip(np.stack([length(c0), length(c1), length(c2), length(c3)], axis=1), 0.0, None)
    # corners on the outermost projected edges lie on the silhouette, where
    # the chord length is exactly 0
    L[k_idx == 0, :2] = 0.0
    L[k_idx + 1 == cnt[s_idx] - 1, 2:] = 0.0
    # corners where several projected edges meet a silhouette vertex are zero
    # as well; anything below the geometric noise floor is treated as zero
    L[L < ZERO_LENGTH * scale] = 0.0
    area1 = 0.5 * np.abs((c1[:, 0] - c0[:, 0]) * (c2[:, 1] - c0[:, 1])
                         - (c2[:, 0] - c0[:, 0]) * (c1[:, 1] - c0[:, 1]))
    area2 = 0.5 * np.abs((c2[:, 0] - c0[:, 0]) * (c3[:, 1] - c0[:, 1])
                         - (c3[:, 0] - c0[:, 0]) * (c2[:, 1] - c0[:, 1]))
    areas = np.concatenate([area1, area2])
    corners = np.concatenate([L[:, [0, 1, 2]], L[:, [0, 2, 3]]])
    fb2 = np.concatenate([fb, fb])
    fa2 = np.concatenate([fa, fa])
    return areas, corners, fb2, fa2, 1.0 / d[fb2], -1.0 / d[fa2]


def _accumulate_cells(cells, weights, q, n_facets, want_grad):
    """Sum the per-direction triangle cells with direction weights."""
    areas = np.concatenate([c[0] * wu for c, wu in zip(cells, weights)])
    corners = np.concatenate([c[1] for c in cells])
    if q == 0:
        tot = float(areas.sum())
    else:
        tot = float(areas @ mean_power_triangle(corners, q))
    grad = None
    if want_grad:
        grad = np.zeros(n_facets)
        if q > 0:
            m = q * areas * mean_power_triangle(corners, q - 1.0)
            fb = np.concatenate([c[2] for c in cells])
            fa = np.concatenate([c[3] for c in cells])
            ib = np.concatenate([c[4] for c in cells])
            ia = np.concatenate([c[5] for c in cells])
            grad += np.bincount(fb, weights=m * ib, minlength=n_facets)
            grad += np.bincount(fa, weights=m * ia, minlength=n_facets)
    return tot, grad


# ---------------------------------------------------------------------------
# direction rules

def _smooth_map(s):
    # polynomial endpoint-flattening map with phi' = 30 s^2 (1 - s)^2
    return s**3 * (10 - 15 * s + 6 * s**2), 30 * s**2 * (1 - s) ** 2


def polygon_direction_rule(P, nodes_per_arc=8, max_arc=math.pi / 32):
    """Angles in [0, pi) and weights for integrating J(theta).

    Breakpoints are the edge directions and (for small polygons) every
    vertex-pair direction, where J may fail to be smooth.
    """
    verts = P.vertices
    order, _ = P.boundary_cycle()
    ring = verts[order]
    dirs = [np.arctan2(*(np.roll(ring, -1, axis=0) - ring).T[::-1])]
    if len(verts) <= 30:
        i, j = np.triu_indices(len(verts), k=1)
        diff = verts[j] - verts[i]
        dirs.append(np.arctan2(diff[:, 1], diff[:, 0]))
    br = np.mod(np.concatenate(dirs), math.pi)
    br = np.unique(np.concatenate([[0.0, math.pi], br]))
    br = br[np.concatenate([[True], np.diff(br) > 1e-12])]
    if br[-1] < math.pi:
        br = np.append(br, math.pi)
    br[-1] = math.pi
    pieces = []
    for lo, hi in zip(br[:-1], br[1:]):
        k = max(1, math.ceil((hi - lo) / max_arc))
        edges = np.linspace(lo, hi, k + 1)
        pieces.append(np.stack([edges[:-1], edges[1:]], axis=1))
    arcs = np.concatenate(pieces)
    s, w = _gl01(nodes_per_arc)
    phi, dphi = _smooth_map(s)
    width = arcs[:, 1] - arcs[:, 0]
    theta = arcs[:, :1] + width[:, None] * phi[None, :]
    weight = width[:, None] * (w * dphi)[None, :]
    return theta.ravel(), weight.ravel()


_ROTATION = Rotation.from_rotvec([0.3183098861837907, 0.5772156649015329, 0.2718281828459045]).as_matrix()
_HALF_AXIS = np.array([0.8127, 0.3412, 0.4721])


@lru_cache(maxsize=None)
def sphere_half_rule(order):
    """One node of each antipodal pair of a rotated Lebedev rule, weights doubled."""
    x, w = lebedev_rule(order)
    pts = (_ROTATION @ x).T
    keep = pts @ _HALF_AXIS > 0
    return pts[keep], 2.0 * w[keep]


LEVELS = {
    2: [(8, 4, math.pi / 32), (16, 8, math.pi / 64)],
    3: [(59, 41), (131, 89)],
}


def _integrate(P, q, want_grad, level, rule):
    n = P.dim
    if n == 2:
        nodes, _, arc = LEVELS[2][level]
        if rule == "coarse":
            nodes = LEVELS[2][level][1]
        theta, w = polygon_direction_rule(P, nodes, arc)
        J, G = _polygon_lines(P, theta, q, want_grad)
        # theta over [0, pi) represents each unoriented direction once
        tot = 2.0 * float(w @ J)
        grad = 2.0 * (w @ G) if want_grad else None
        return tot, grad
    fine, coarse = LEVELS[3][level]
    pts, w = sphere_half_rule(fine if rule == "fine" else coarse)
    edges = P.edges()
    cells = [_polytope3_cells(P, edges, u) for u in pts]
    tot, grad = _accumulate_cells(cells, w, q, len(P.facets), want_grad)
    return tot, grad


def line_quadrature(P, q, want_grad=True, level=0, estimate_error=True):
    """Return (int_S J_u du, grad wrt offsets, error estimate of the integral).

    The error estimate is the difference to a coarser rule; the gradient is
    taken from the fine rule.
    """
    if P.dim not in (2, 3):
        raise ValueError("line quadrature is available for n = 2 and n = 3 only")
    tot, grad = _integrate(P, q, want_grad, level, "fine")
    err = 0.0
    grad_err = None
    if estimate_error:
        tot_c, grad_c = _integrate(P, q, want_grad, level, "coarse")
        err = abs(tot - tot_c)
        if want_grad:
            grad_err = np.abs(grad - grad_c)
    return tot, grad, err, grad_err
