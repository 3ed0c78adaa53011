"""Verification harness: residuals, variational finite differences, invariant battery."""
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import chord
from .measure import DiscreteMeasure, UniformDensity, discretize
from .polytope import (HalfspaceSpec, Polytope, cube_normals, random_polytope, wulff_shape)

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass
class ResidualReport:
    per_atom: List[tuple]  # (target, achieved, relative error)
    max_rel: float
    total_mass_rel: float
    combined_std_error: float
    unmatched: List[int] = field(default_factory=list)
    uncertainties: Optional[np.ndarray] = None

    def to_json(self) -> dict:
        return {
            "per_atom": [{"target": t, "achieved": a, "rel_error": r} for t, a, r in self.per_atom],
            "max_rel": self.max_rel,
            "total_mass_rel": self.total_mass_rel,
            "combined_std_error": self.combined_std_error,
            "unmatched": self.unmatched,
        }


def residual(P: Polytope, mu: DiscreteMeasure, p: float, q: float, samples: int = 2 * 10**5,
             seed=0, method: str = "auto") -> ResidualReport:
    """Compare F_{p,q}(P, .) with mu atom by atom.

    Atoms whose direction is not a normal of P (or whose facet is empty)
    get achieved value 0 and are listed in ``unmatched``.
    """
    F = chord.chord_measure(P, q, method=method, samples_per_facet=samples, seed=seed)
    Fp = chord.lp_chord_measure(P, p, q, F=F)
    cos = mu.directions @ P.normals.T
    best = np.argmax(cos, axis=1)
    matched = cos[np.arange(mu.size), best] > 1.0 - 1e-12
    achieved = np.where(matched, Fp.values[best], 0.0)
    unc = np.where(matched, Fp.uncertainties[best], 0.0)
    unmatched = [int(i) for i in np.nonzero(~matched | (achieved == 0))[0]]
    rel = np.abs(achieved - mu.weights) / mu.weights
    total = float(np.sum(mu.weights))
    rows = [(float(t), float(a), float(r)) for t, a, r in zip(mu.weights, achieved, rel)]
    return ResidualReport(rows, float(rel.max()), abs(float(achieved.sum()) - total) / total,
                          float(np.sqrt(np.sum(unc**2))), unmatched, unc)


@dataclass
class VariationalResult:
    lhs: float
    rhs: float
    gap: float
    sigma: float
    passes: bool

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.gap))


def variational_check(spec: HalfspaceSpec, beta, q: float, h: Optional[float] = None,
                      samples: int = 10**6, seed=0, method: str = "auto",
                      rel_floor: float = 1e-3) -> VariationalResult:
    """Central difference of t -> I_q([z + t beta]) against sum_i beta_i F_q([z], v_i).

    ``gap`` is |lhs - rhs| in units of the combined uncertainty.  For the
    quadrature path the uncertainty combines the Richardson truncation
    estimate of the difference quotient, a round-off floor and the change of
    lhs - rhs at the next quadrature level.  For the Monte Carlo path the two
    perturbed integrals share their random lines.
    """
    beta = np.asarray(beta, dtype=float)
    z = spec.offsets
    n = spec.dim
    if h is None:
        h = 1e-4 * float(np.mean(np.abs(z)))
    P0 = wulff_shape(spec)
    if method == "auto":
        method = "quadrature" if n in (2, 3) else "mc"

    def shape(t):
        return wulff_shape(spec.with_offsets(z + t * beta))

    if method == "quadrature":
        def I(t, level=0):
            if q == 1:
                return shape(t).volume
            return chord.chord_integral_quadrature(shape(t), q, level=level).value

        i_p, i_m = I(h), I(-h)
        i_p2, i_m2 = I(2 * h), I(-2 * h)
        d1 = (i_p - i_m) / (2 * h)
        d2 = (i_p2 - i_m2) / (4 * h)
        lhs = d1
        F = chord.chord_measure(P0, q, method="quadrature")
        rhs = float(beta @ F.values)
        # The 2D direction rule's breakpoints move with z, so the quotient is
        # not the exact derivative of the rule.  The part of lhs - rhs due to
        # the quadrature is estimated by how much it changes at the next level.
        d_fine = (I(h, 1) - I(-h, 1)) / (2 * h)
        rhs_fine = float(beta @ chord.chord_measure(P0, q, method="quadrature", level=1).values)
        consistency = abs((lhs - rhs) - (d_fine - rhs_fine))
        roundoff = 64 * EPS * max(abs(i_p), abs(i_m)) / h
        sigma = math.hypot(abs(d1 - d2) / 3.0, consistency) + roundoff
    else:
        diff = chord.paired_line_difference(shape(h), shape(-h), q, samples, seed)
        lhs = diff.value / (2 * h)
        F = chord.chord_measure(P0, q, method="mc", samples_per_facet=max(1000, samples // max(1, spec.size)),
                                seed=seed)
        rhs = float(beta @ F.values)
        sigma = math.hypot(diff.std_error / (2 * h), float(np.sqrt(np.sum((beta * F.std_errors) ** 2))))
    gap = abs(lhs - rhs) / sigma if sigma > 0 else (0.0 if lhs == rhs else math.inf)
    passes = abs(lhs - rhs) <= max(3 * sigma, rel_floor * abs(rhs))
    return VariationalResult(float(lhs), float(rhs), float(gap), float(sigma), bool(passes))


# ---------------------------------------------------------------------------
# invariant battery

@dataclass
class Row:
    name: str
    shape: str
    params: dict
    measured: float
    threshold: float
    passed: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "shape": self.shape, "params": self.params,
                "measured": self.measured, "threshold": self.threshold,
                "passed": self.passed, "detail": self.detail}


@dataclass
class SuiteReport:
    rows: List[Row]
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def failures(self) -> List[Row]:
        return [r for r in self.rows if not r.passed]

    def to_json(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "rows": [r.to_json() for r in self.rows]}

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def default_battery(seed: int = 0):
    """Square, cube, three random polygons and two random 3-polytopes."""
    rng = np.random.default_rng(seed)
    shapes = [
        ("square", wulff_shape(HalfspaceSpec(cube_normals(2), np.ones(4)))),
        ("cube", wulff_shape(HalfspaceSpec(cube_normals(3), np.ones(6)))),
    ]
    for k in range(3):
        shapes.append((f"polygon{k}", random_polytope(rng, 5 + 2 * k, 2)))
    for k in range(2):
        shapes.append((f"polytope{k}", random_polytope(rng, 8 + 2 * k, 3)))
    return shapes


def battery_from_json(data) -> list:
    out = []
    for k, item in enumerate(data.get("shapes", [])):
        normals = np.asarray(item["normals"], dtype=float)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
        out.append((item.get("name", f"shape{k}"), wulff_shape(HalfspaceSpec(normals, item["offsets"]))))
    return out


def _gap_row(name, shape, params, a, ua, b, ub, k=3.0, detail=""):
    sigma = math.hypot(ua, ub)
    gap = abs(a - b) / sigma if sigma > 0 else (0.0 if a == b else math.inf)
    return Row(name, shape, params, float(gap), k, bool(gap <= k),
               detail or f"{a:.10g} vs {b:.10g} (sigma {sigma:.3g})")


def _rel_row(name, shape, params, a, b, tol, detail=""):
    rel = abs(a - b) / max(abs(b), 1e-300)
    return Row(name, shape, params, float(rel), tol, bool(rel <= tol),
               detail or f"{a:.12g} vs {b:.12g}")


def invariant_suite(seed: int = 0, battery=None, q_values=(0.5, 1.0, 1.5, 2.0, 3.0),
                    p_values=(0.0, 0.3, 0.7), samples: int = 4 * 10**5,
                    fault: Optional[float] = None) -> SuiteReport:
    """Run the module invariants over a battery of shapes.

    With ``fault`` set, every unit-ball volume is multiplied by that factor
    while the suite runs, which must make some rows fail.
    """
    if fault is not None:
        with chord.perturbed_omega(fault):
            return invariant_suite(seed, battery, q_values, p_values, samples, None)
    shapes = default_battery(seed) if battery is None else battery
    rows: List[Row] = []
    ss = np.random.SeedSequence(seed)
    for si, (name, P) in enumerate(shapes):
        n = P.dim
        child = ss.spawn(1)[0]
        rng = np.random.default_rng(child)
        rows.append(Row("minkowski_relation", name, {}, P.minkowski_residual, 1e-7,
                        P.minkowski_residual <= 1e-7 * max(1.0, P.surface_area)))
        x = P.interior_point + 0.2 * P.inner_radius * rng.uniform(-1, 1, n) / math.sqrt(n)
        v0 = chord.dual_volume(P, x, 0.0).value
        vn = chord.dual_volume(P, x, float(n)).value
        rows.append(_rel_row("dual_volume_q0_is_omega", name, {}, v0, chord.omega(n), 1e-6))
        rows.append(_rel_row("dual_volume_qn_is_volume", name, {}, vn, P.volume, 1e-6))
        lines0 = chord.chord_integral_lines(P, 0.0, samples, child.spawn(1)[0])
        rows.append(_gap_row("closed_form_I0", name, {"q": 0.0}, lines0.value, lines0.std_error,
                             chord.closed_form_I0(P), 0.0))
        lines_np1 = chord.chord_integral_lines(P, float(n + 1), samples, child.spawn(1)[0])
        rows.append(_gap_row("closed_form_I_n_plus_1", name, {"q": n + 1.0}, lines_np1.value,
                             lines_np1.std_error, chord.closed_form_I_np1(P), 0.0))
        shift = rng.uniform(-0.5, 0.5, n)
        P_t = wulff_shape(P.spec.translated(shift))
        for q in q_values:
            I, F = chord.quadrature_functionals(P, q)
            G = chord.cone_chord_measure(P, q, F=F)
            lines = chord.chord_integral_lines(P, q, samples, child.spawn(1)[0])
            rows.append(_gap_row("total_measure_identity", name, {"q": q}, G.total,
                                 G.total_uncertainty, lines.value, lines.std_error))
            rows.append(_gap_row("cross_estimator_quadrature_vs_lines", name, {"q": q}, I.value,
                                 I.uncertainty, lines.value, lines.std_error))
            It, Ft = chord.quadrature_functionals(P_t, q)
            rows.append(_rel_row("translation_invariance_I", name, {"q": q}, It.value, I.value, 1e-9))
            change = float(np.max(np.abs(Ft.values - F.values)) / np.max(np.abs(F.values)))
            rows.append(Row("translation_invariance_F", name, {"q": q}, change, 1e-9,
                            change <= 1e-9, "largest facet change relative to largest value"))
            for t in (0.5, 2.0):
                P_s = wulff_shape(P.spec.scaled(t))
                Is, Fs = chord.quadrature_functionals(P_s, q)
                rows.append(_rel_row("homogeneity_I", name, {"q": q, "t": t}, Is.value,
                                     t ** (n + q - 1) * I.value, 1e-9))
                for p in p_values:
                    a = chord.lp_chord_measure(P_s, p, q, F=Fs).values
                    b = t ** (n + q - 1 - p) * chord.lp_chord_measure(P, p, q, F=F).values
                    rel = float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
                    rows.append(Row("homogeneity_Fpq", name, {"q": q, "p": p, "t": t}, rel, 1e-9,
                                    rel <= 1e-9))
    # discretizer sandwich on the sphere partitions
    for n, m in ((2, 1), (2, 4), (2, 16), (3, 1), (3, 2)):
        mu = discretize(UniformDensity(n), m, seed=seed)
        Q = wulff_shape(HalfspaceSpec(mu.directions, np.ones(mu.size)))
        rmax = float(np.max(np.linalg.norm(Q.vertices, axis=1)))
        ok = rmax < 2.0 and np.all(Q.support >= 1 - 1e-12)
        rows.append(Row("sandwich_B_Q_2B", f"sphere_n{n}", {"m": m}, rmax, 2.0, bool(ok)))
        mass_err = abs(float(np.sum(mu.weights)) - 1.0)
        rows.append(Row("discretize_mass", f"sphere_n{n}", {"m": m}, mass_err, 1e-12, mass_err <= 1e-12))
    return SuiteReport(rows, seed)
