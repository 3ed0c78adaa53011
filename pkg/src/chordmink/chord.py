"""Dual quermassintegrals, chord integrals and chord measures of polytopes.

Conventions used throughout:

* Vt_q(K, x) = (1/n) int_{S^{n-1}} rho_{K,x}(u)^q du.
* I_q(K) = int |K cap l|^q dl, with the line measure dl = dy du / (n omega_n)
  over oriented lines (u on the sphere, y in u^perp).  This is the
  normalization under which I_1 = V.
* F_q(K, v_i) = (2q/omega_n) int_{facet i} Vt^+_{q-1}(K, z) dz, where Vt^+
  integrates only over the inward hemisphere at the boundary point z.
* F_{p,q} = h^{1-p} F_q and G_q = F_{0,q} / (n + q - 1).

Three evaluation paths exist: seeded Monte Carlo over points and
directions ("volume-form"), Monte Carlo over lines ("line-form"), and
deterministic line quadrature for n = 2, 3 ("quadrature").
"""
import contextlib
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import lebedev_rule, quad

from . import _linequad
from ._sampling import derive_seed, run_blocks, uniform_sphere
from ._tolerances import DEFAULT
from .errors import DegenerateShapeError, NotInteriorError
from .polytope import Polytope, support_function, wulff_shape

logger = logging.getLogger(__name__)

_OMEGA_FAULT = 1.0


def omega(n: int) -> float:
    """Volume of the unit ball in R^n."""
    return _OMEGA_FAULT * math.pi ** (n / 2) / math.gamma(n / 2 + 1)


@contextlib.contextmanager
def perturbed_omega(factor: float):
    """Test hook: scale every unit-ball volume by ``factor`` inside the block.

    Not thread-safe; meant only for fault-injection checks.
    """
    global _OMEGA_FAULT
    old = _OMEGA_FAULT
    _OMEGA_FAULT = old * factor
    try:
        yield
    finally:
        _OMEGA_FAULT = old


@dataclass(frozen=True)
class ChordEstimate:
    value: float
    std_error: float
    samples: int
    estimator: str
    error_estimate: float = 0.0

    @property
    def uncertainty(self) -> float:
        """Standard error for Monte Carlo values, quadrature error estimate otherwise."""
        return math.hypot(self.std_error, self.error_estimate)

    def to_json(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "samples": self.samples,
                "estimator": self.estimator, "error_estimate": self.error_estimate}


@dataclass(frozen=True)
class MeasureEstimate:
    """Per-facet values of a chord-type measure with per-facet uncertainties."""

    values: np.ndarray
    std_errors: np.ndarray
    samples: int
    estimator: str
    error_estimates: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.error_estimates is None:
            object.__setattr__(self, "error_estimates", np.zeros_like(self.values))

    @property
    def uncertainties(self) -> np.ndarray:
        return np.hypot(self.std_errors, self.error_estimates)

    @property
    def total(self) -> float:
        return float(math.fsum(self.values))

    @property
    def total_uncertainty(self) -> float:
        # MC facet estimates use independent streams; quadrature errors are
        # correlated across facets, so they add linearly
        return float(math.hypot(np.sqrt(np.sum(self.std_errors**2)), np.sum(self.error_estimates)))

    def scaled(self, factors) -> "MeasureEstimate":
        f = np.abs(np.asarray(factors, dtype=float))
        return MeasureEstimate(self.values * factors, self.std_errors * f, self.samples,
                               self.estimator, self.error_estimates * f)

    def to_json(self) -> dict:
        return {"values": self.values.tolist(), "std_errors": self.std_errors.tolist(),
                "error_estimates": self.error_estimates.tolist(),
                "samples": self.samples, "estimator": self.estimator}


# ---------------------------------------------------------------------------
# radial functions

def _radial(P: Polytope, x, u, exclude=None):
    """Rays from (possibly boundary) points ``x`` (M, n) along ``u`` (M, n)."""
    slack = P.offsets[None, :] - np.atleast_2d(x) @ P.normals.T
    d = u @ P.normals.T
    good = d > DEFAULT.radial_direction
    if exclude is not None:
        good[:, exclude] = False
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(good, np.maximum(slack, 0.0) / np.where(good, d, 1.0), np.inf)
    return t.min(axis=1)


def _check_interior(P: Polytope, x):
    slack = P.offsets - P.normals @ x
    if np.any(slack <= DEFAULT.radial_interior * P.scale):
        raise NotInteriorError("evaluation point is not strictly inside the polytope")
    return slack


# ---------------------------------------------------------------------------
# dual quermassintegrals

def _polygon_cone_terms(P, x, q, skip=None):
    """Sum over edges of int rho^q d(theta) from ``x``, by quadrature in tan(angle)."""
    total, err = 0.0, 0.0
    scale = P.scale
    for f in P.facets:
        if f.empty or f.normal_index == skip:
            continue
        v = P.normals[f.normal_index]
        s = P.support[f.normal_index] - v @ x
        if s <= 1e-14 * scale:
            continue
        tangent = np.array([-v[1], v[0]])
        a, b = f.simplices[0]
        foot = x + s * v
        ta = (a - foot) @ tangent / s
        tb = (b - foot) @ tangent / s
        lo, hi = min(ta, tb), max(ta, tb)
        val, e = quad(lambda t: (1.0 + t * t) ** (q / 2.0 - 1.0), lo, hi,
                      epsabs=1e-14, epsrel=1e-13, limit=200)
        total += s**q * val
        err += s**q * e
    return total, err


def _g_radial(T, s, q):
    # int_0^T (s^2 + r^2)^{(q-3)/2} r dr
    if abs(q - 1.0) < 1e-12:
        return 0.5 * np.log1p((T / s) ** 2)
    return ((s * s + T * T) ** ((q - 1.0) / 2.0) - s ** (q - 1.0)) / (q - 1.0)


def _polytope3_cone_terms(P, x, q, skip=None):
    """Sum over facets of int_{cone over facet} rho^q du from ``x``.

    Each facet cone is split into signed wedges (foot point, edge); inside a
    wedge the radial integral is closed form and the angular one is done
    by adaptive quadrature in tan(angle).
    """
    total, err = 0.0, 0.0
    scale = P.scale
    for f in P.facets:
        if f.empty or f.normal_index == skip:
            continue
        v = P.normals[f.normal_index]
        s = P.support[f.normal_index] - v @ x
        if s <= 1e-14 * scale:
            continue
        foot = x + s * v
        _, _, vt = np.linalg.svd(v[None, :])
        basis = vt[1:]
        # boundary edges of the facet: simplices are (centroid, a, b)
        tri = f.simplices
        a2 = (tri[:, 1] - foot) @ basis.T
        b2 = (tri[:, 2] - foot) @ basis.T
        c2 = (tri[:, 0] - foot) @ basis.T
        for pa, pb, pc in zip(a2, b2, c2):
            # orient the edge counter-clockwise around the facet centroid
            if (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]) < 0:
                pa, pb = pb, pa
            edge = pb - pa
            length = np.linalg.norm(edge)
            if length <= 1e-15 * scale:
                continue
            t_hat = edge / length
            cross = pa[0] * pb[1] - pa[1] * pb[0]
            dd = abs(cross) / length
            if dd <= 1e-15 * scale:
                continue
            sign = 1.0 if cross > 0 else -1.0
            ta = pa @ t_hat / dd
            tb = pb @ t_hat / dd
            lo, hi = min(ta, tb), max(ta, tb)

            def integrand(t, dd=dd, s=s):
                return _g_radial(dd * math.sqrt(1.0 + t * t), s, q) / (1.0 + t * t)

            val, e = quad(integrand, lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)
            total += sign * s * val
            err += s * e
    return total, err


def _cone_terms(P, x, q, skip=None):
    if P.dim == 2:
        return _polygon_cone_terms(P, x, q, skip)
    if P.dim == 3:
        return _polytope3_cone_terms(P, x, q, skip)
    raise ValueError("exact cone decomposition is available for n = 2, 3")


def dual_volume(P: Polytope, x, q: float, method: str = "auto", samples: int = 10**6,
                seed=0) -> ChordEstimate:
    """Vt_q(P, x) = (1/n) int_{S^{n-1}} rho_{P,x}(u)^q du.

    ``method``: "exact" (facet-cone decomposition, n = 2, 3), "lebedev"
    (5810-node rule, n = 3), "trapezoid" (4096 angles, n = 2), "mc"
    (seeded directions) or "auto" (exact when available, else mc).
    """
    x = np.asarray(x, dtype=float)
    _check_interior(P, x)
    n = P.dim
    if method == "auto":
        method = "exact" if n in (2, 3) else "mc"
    if method == "exact":
        total, err = _cone_terms(P, x, q)
        return ChordEstimate(total / n, 0.0, 1, "quadrature", err / n)
    if method == "trapezoid":
        if n != 2:
            raise ValueError("trapezoid rule is for n = 2")
        th = 2 * math.pi * np.arange(4096) / 4096
        u = np.stack([np.cos(th), np.sin(th)], axis=1)
        vals = _radial(P, x[None, :], u) ** q
        th2 = th[::2]
        coarse = _radial(P, x[None, :], np.stack([np.cos(th2), np.sin(th2)], axis=1)) ** q
        fine = 2 * math.pi * vals.mean() / 2
        return ChordEstimate(fine, 0.0, 4096, "quadrature", abs(fine - math.pi * coarse.mean()))
    if method == "lebedev":
        if n != 3:
            raise ValueError("Lebedev rule is for n = 3")
        pts, w = lebedev_rule(131)
        fine = float(w @ _radial(P, x[None, :], pts.T) ** q) / 3
        pts2, w2 = lebedev_rule(89)
        coarse = float(w2 @ _radial(P, x[None, :], pts2.T) ** q) / 3
        return ChordEstimate(fine, 0.0, len(w), "quadrature", abs(fine - coarse))
    if method == "mc":
        area = n * omega(n)

        def block(rng, size):
            return _radial(P, x[None, :], uniform_sphere(rng, size, n)) ** q

        m = run_blocks(block, samples, seed)
        return ChordEstimate(area * m.mean / n, area * m.std_error / n, m.count, "volume-form")
    raise ValueError(f"unknown method {method!r}")


def boundary_dual_volume(P: Polytope, z, facet: int, q: float) -> ChordEstimate:
    """(1/n) int over the inward hemisphere of rho_{P,z}^q, for z on facet ``facet``."""
    total, err = _cone_terms(P, np.asarray(z, dtype=float), q, skip=facet)
    return ChordEstimate(total / P.dim, 0.0, 1, "quadrature", err / P.dim)


# ---------------------------------------------------------------------------
# chord integrals

def closed_form_I0(P: Polytope) -> float:
    n = P.dim
    return omega(n - 1) / (n * omega(n)) * P.surface_area


def closed_form_I1(P: Polytope) -> float:
    return P.volume


def closed_form_I_np1(P: Polytope) -> float:
    n = P.dim
    return (n + 1) / omega(n) * P.volume**2


def _cone_simplices(P: Polytope, apex):
    simp, _, areas = P.simplices()
    n = P.dim
    full = np.concatenate([np.broadcast_to(apex, (len(simp), 1, n)), simp], axis=1)
    edges = full[:, 1:, :] - full[:, :1, :]
    vols = np.abs(np.linalg.det(edges)) / math.factorial(n)
    return full, vols


def sample_uniform(P: Polytope, rng, size: int, cones=None) -> np.ndarray:
    """Uniform points in P via a cone-over-facets simplex decomposition."""
    full, vols = cones if cones is not None else _cone_simplices(P, P.interior_point)
    pick = rng.choice(len(vols), size=size, p=vols / vols.sum())
    bary = rng.dirichlet(np.ones(P.dim + 1), size=size)
    return np.einsum("ck,ckn->cn", bary, full[pick])


def _inner_shell(P: Polytope, fraction: float = 0.9):
    """Offset tau with vol{x in P : all slacks >= tau} = fraction * vol(P)."""
    lo, hi = 0.0, P.inner_radius
    target = fraction * P.volume
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        try:
            inner = wulff_shape(P.spec.with_offsets(P.offsets - mid))
            vol = inner.volume
        except (DegenerateShapeError, ValueError):
            vol = 0.0
        if vol > target:
            lo = mid
        else:
            hi = mid
    return lo, wulff_shape(P.spec.with_offsets(P.offsets - lo))


def chord_integral(P: Polytope, q: float, samples: int = 10**6, seed=0,
                   boundary_fraction: float = 0.1) -> ChordEstimate:
    """Volume-form Monte Carlo: I_q = q V E[rho(z, u)^{q-1}], z uniform in P, u uniform.

    Directions are used in antithetic pairs.  For q < 1 the integrand blows up
    at the boundary, so the shell holding ``boundary_fraction`` of the volume
    is sampled separately with twice its proportional share of points.
    """
    if q <= 0:
        raise ValueError("chord_integral needs q > 0; use closed_form_I0 for q = 0")
    n = P.dim
    V = P.volume

    def values(pts, rng):
        u = uniform_sphere(rng, len(pts), n)
        r1 = _radial(P, pts, u)
        r2 = _radial(P, pts, -u)
        return 0.5 * (r1 ** (q - 1.0) + r2 ** (q - 1.0))

    if q >= 1:
        cones = _cone_simplices(P, P.interior_point)
        m = run_blocks(lambda rng, k: values(sample_uniform(P, rng, k, cones), rng), samples, seed)
        return ChordEstimate(q * V * m.mean, q * V * m.std_error, m.count, "volume-form")

    tau, inner = _inner_shell(P, 1.0 - boundary_fraction)
    v_in = inner.volume
    v_out = V - v_in
    n_out = max(2, int(round(samples * min(0.5, 2 * boundary_fraction))))
    n_in = max(2, samples - n_out)
    cones_in = _cone_simplices(inner, inner.interior_point)
    cones_all = _cone_simplices(P, P.interior_point)
    root = np.random.SeedSequence(seed)
    s_in, s_out = root.spawn(2)
    m_in = run_blocks(lambda rng, k: values(sample_uniform(inner, rng, k, cones_in), rng), n_in, s_in)

    def shell_block(rng, k):
        out = np.empty((0, n))
        while len(out) < k:
            pts = sample_uniform(P, rng, 2 * k, cones_all)
            slack = P.offsets[None, :] - pts @ P.normals.T
            out = np.vstack([out, pts[slack.min(axis=1) < tau]])
        return values(out[:k], rng)

    m_out = run_blocks(shell_block, n_out, s_out)
    value = q * (v_in * m_in.mean + v_out * m_out.mean)
    err = q * math.hypot(v_in * m_in.std_error, v_out * m_out.std_error)
    return ChordEstimate(value, err, m_in.count + m_out.count, "volume-form")


def chord_integral_lines(P: Polytope, q: float, samples: int = 10**6, seed=0) -> ChordEstimate:
    """Line-form Monte Carlo over random lines hitting a ball around P.

    I_q = omega_{n-1} R^{n-1} E[|P cap l|^q 1{l hits P}] with u uniform on the
    sphere and the offset uniform in the (n-1)-disc of radius R about the
    Chebyshev center; q = 0 counts hitting lines.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    n = P.dim
    c = P.interior_point
    R = float(np.max(np.linalg.norm(P.vertices - c, axis=1))) * (1 + 1e-9)

    def block(rng, k):
        u = uniform_sphere(rng, k, n)
        # uniform point of the (n-1)-disc of radius R in u^perp
        g = rng.standard_normal((k, n))
        g -= np.sum(g * u, axis=1, keepdims=True) * u
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        y = R * g * rng.random(k)[:, None] ** (1.0 / (n - 1))
        L, hit = _line_lengths(P, c + y, u)
        if q == 0:
            return hit.astype(float)
        return np.where(hit, L**q, 0.0)

    m = run_blocks(block, samples, seed)
    window = omega(n - 1) * R ** (n - 1)
    return ChordEstimate(window * m.mean, window * m.std_error, m.count, "line-form")


def riesz_chord_integral(P: Polytope, q: float, samples: int = 10**6, seed=0) -> ChordEstimate:
    """I_q = q(q-1)/(n omega_n) int_P int_P |x - y|^{q-n-1}, valid for q > 1."""
    if q <= 1:
        raise ValueError("the double-integral form needs q > 1")
    n = P.dim
    V = P.volume
    cones = _cone_simplices(P, P.interior_point)

    def block(rng, k):
        a = sample_uniform(P, rng, k, cones)
        b = sample_uniform(P, rng, k, cones)
        return np.linalg.norm(a - b, axis=1) ** (q - n - 1.0)

    m = run_blocks(block, samples, seed)
    const = q * (q - 1.0) / (n * omega(n)) * V * V
    return ChordEstimate(const * m.mean, const * m.std_error, m.count, "riesz")


# ---------------------------------------------------------------------------
# deterministic quadrature path

def _line_norm(n):
    return n * omega(n)


def quadrature_functionals(P: Polytope, q: float, want_grad: bool = True, level: int = 0,
                           estimate_error: bool = True):
    """(I_q, F_q) from the deterministic line quadrature (n = 2, 3)."""
    n = P.dim
    nodes = _node_count(P, level)
    if q == 1.0:
        # I_1 = V and F_1 = facet areas exactly; the quadrature reproduces both
        I = ChordEstimate(P.volume, 0.0, nodes, "quadrature", 0.0)
        F = None
        if want_grad:
            F = MeasureEstimate(P.facet_areas, np.zeros(len(P.facets)), nodes, "quadrature")
        return I, F
    tot, grad, err, grad_err = _linequad.line_quadrature(P, q, want_grad, level, estimate_error)
    norm = _line_norm(n)
    I = ChordEstimate(tot / norm, 0.0, nodes, "quadrature", err / norm)
    F = None
    if want_grad:
        ge = grad_err / norm if grad_err is not None else np.zeros(len(grad))
        F = MeasureEstimate(grad / norm, np.zeros(len(grad)), nodes, "quadrature", ge)
    return I, F


def _node_count(P, level):
    if P.dim == 2:
        return _linequad.LEVELS[2][level][0]
    return len(_linequad.sphere_half_rule(_linequad.LEVELS[3][level][0])[1])


def chord_integral_quadrature(P: Polytope, q: float, level: int = 0) -> ChordEstimate:
    if q < 0:
        raise ValueError("q must be nonnegative")
    return quadrature_functionals(P, q, want_grad=False, level=level)[0]


# ---------------------------------------------------------------------------
# chord measures

def _facet_mc(P: Polytope, i: int, q: float, samples: int, seed):
    f = P.facets[i]
    n = P.dim
    probs = f.simplex_areas / f.simplex_areas.sum()
    v = P.normals[i]

    def block(rng, k):
        pick = rng.choice(len(probs), size=k, p=probs)
        bary = rng.dirichlet(np.ones(n), size=k)
        z = np.einsum("ck,ckn->cn", bary, f.simplices[pick])
        u = uniform_sphere(rng, k, n)
        u = np.where((u @ v)[:, None] > 0, -u, u)  # inward hemisphere
        rho = _radial(P, z, u, exclude=i)
        return rho ** (q - 1.0)

    m = run_blocks(block, samples, seed)
    return q * f.area * m.mean, q * f.area * m.std_error, m.count


def chord_measure(P: Polytope, q: float, method: str = "auto", samples_per_facet: int = 2 * 10**5,
                  seed=0, level: int = 0) -> MeasureEstimate:
    """F_q(P, v_i) for every normal of P; empty facets get 0.

    ``method`` is "quadrature" (n = 2, 3), "mc" (facet points and inward
    directions), or "auto" (quadrature when available).
    """
    if q <= 0:
        raise ValueError("chord measures need q > 0")
    n = P.dim
    if method == "auto":
        method = "quadrature" if n in (2, 3) else "mc"
    if method == "quadrature":
        return quadrature_functionals(P, q, True, level)[1]
    if method != "mc":
        raise ValueError(f"unknown method {method!r}")
    vals = np.zeros(len(P.facets))
    errs = np.zeros(len(P.facets))
    count = 0
    for f in P.facets:
        if f.empty:
            continue
        i = f.normal_index
        vals[i], errs[i], c = _facet_mc(P, i, q, samples_per_facet, derive_seed(seed, i))
        count = max(count, c)
    return MeasureEstimate(vals, errs, max(count, 1), "mc")


def _check_origin(P: Polytope):
    if np.any(P.offsets < -DEFAULT.interior_slack * P.scale) or np.any(P.support < -DEFAULT.interior_slack * P.scale):
        raise NotInteriorError("the origin must lie in the polytope")


def lp_chord_measure(P: Polytope, p: float, q: float, F: Optional[MeasureEstimate] = None,
                     **kwargs) -> MeasureEstimate:
    """F_{p,q}(P, v_i) = h_P(v_i)^{1-p} F_q(P, v_i)."""
    if not p < 1.0 and p != 1.0:
        raise ValueError("p must be at most 1")
    _check_origin(P)
    if F is None:
        F = chord_measure(P, q, **kwargs)
    h = np.clip(P.support, 0.0, None)
    return F.scaled(h ** (1.0 - p))


def cone_chord_measure(P: Polytope, q: float, F: Optional[MeasureEstimate] = None,
                       **kwargs) -> MeasureEstimate:
    """G_q = F_{0,q} / (n + q - 1); its total mass is I_q."""
    n = P.dim
    F0 = lp_chord_measure(P, 0.0, q, F=F, **kwargs)
    return F0.scaled(np.full(len(F0.values), 1.0 / (n + q - 1.0)))


def support_values(P: Polytope, directions) -> np.ndarray:
    return support_function(P, np.atleast_2d(directions))


def _line_lengths(P: Polytope, base, u):
    """Chord lengths of lines base + t u (rows) through P; 0 for missing lines."""
    slack = P.offsets[None, :] - base @ P.normals.T
    d = u @ P.normals.T
    pos = d > 1e-15
    neg = d < -1e-15
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = slack / np.where(pos | neg, d, 1.0)
    t_hi = np.where(pos, ratio, np.inf).min(axis=1)
    t_lo = np.where(neg, ratio, -np.inf).max(axis=1)
    flat_ok = np.all((pos | neg) | (slack >= 0), axis=1)
    hit = (t_hi > t_lo) & flat_ok
    return np.where(hit, t_hi - t_lo, 0.0), hit


def paired_line_difference(P_plus: Polytope, P_minus: Polytope, q: float, samples: int = 10**6,
                           seed=0, center=None, radius=None) -> ChordEstimate:
    """I_q(P_plus) - I_q(P_minus) with common random lines (line-form)."""
    n = P_plus.dim
    c = P_plus.interior_point if center is None else np.asarray(center, dtype=float)
    if radius is None:
        verts = np.vstack([P_plus.vertices, P_minus.vertices])
        radius = float(np.max(np.linalg.norm(verts - c, axis=1))) * (1 + 1e-9)

    def block(rng, k):
        u = uniform_sphere(rng, k, n)
        g = rng.standard_normal((k, n))
        g -= np.sum(g * u, axis=1, keepdims=True) * u
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        base = c + radius * g * rng.random(k)[:, None] ** (1.0 / (n - 1))
        la, ha = _line_lengths(P_plus, base, u)
        lb, hb = _line_lengths(P_minus, base, u)
        if q == 0:
            return ha.astype(float) - hb.astype(float)
        return np.where(ha, la**q, 0.0) - np.where(hb, lb**q, 0.0)

    m = run_blocks(block, samples, seed)
    window = omega(n - 1) * radius ** (n - 1)
    return ChordEstimate(window * m.mean, window * m.std_error, m.count, "line-form")
