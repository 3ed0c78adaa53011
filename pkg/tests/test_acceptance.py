"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or as part of the full
suite; the verdict lines are printed even when output capture is on.
"""
import math
import time

import numpy as np
import pytest

from chordmink import chord
from chordmink.errors import InvalidMeasureError
from chordmink.measure import (DiscreteMeasure, UniformDensity, VonMisesFisherDensity, discretize,
                               general_position_check, hemisphere_check, sandwich_threshold,
                               subspace_bound, subspace_mass_check, total_mass)
from chordmink.polytope import (HalfspaceSpec, cube_normals, hausdorff_distance, random_normals,
                                random_polytope, wulff_shape)
from chordmink.solver import SolverConfig, solve, stationarity_residual, xi_star
from chordmink.verify import default_battery, variational_check

pytestmark = pytest.mark.acceptance

Q_VALUES = (0.5, 1.0, 1.5, 2.0, 3.0)
SAMPLES = 10**6


@pytest.fixture
def verdict(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nacceptance {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def gap(a, ua, b, ub, floor=0.0):
    """|a - b| in units of the combined uncertainty (plus an optional round-off floor)."""
    sigma = math.hypot(ua, ub) + floor
    if sigma == 0:
        return 0.0 if a == b else math.inf
    return abs(a - b) / sigma


def unit_square():
    return wulff_shape(HalfspaceSpec(cube_normals(2), np.array([1.0, 1.0, 0.0, 0.0])))


def cube():
    return wulff_shape(HalfspaceSpec(cube_normals(3), np.ones(6)))


def small_battery():
    rng = np.random.default_rng(11)
    shapes = [("square", wulff_shape(HalfspaceSpec(cube_normals(2), np.ones(4)))), ("cube", cube())]
    shapes += [(f"polygon{k}", random_polytope(rng, 5 + k, 2)) for k in range(3)]
    return shapes


# ---------------------------------------------------------------------------

def test_01_closed_form_chord_integrals(verdict):
    P = unit_square()
    targets = {0.0: 4 / math.pi, 1.0: 1.0, 3.0: 3 / math.pi}
    worst, parts = 0.0, []
    for q, exact in targets.items():
        ests = {"lines": chord.chord_integral_lines(P, q, SAMPLES, seed=1),
                "quadrature": chord.chord_integral_quadrature(P, q)}
        # the volume form needs q > 0
        if q > 0:
            ests["volume"] = chord.chord_integral(P, q, SAMPLES, seed=2)
        for name, est in ests.items():
            rel = abs(est.value - exact) / exact
            worst = max(worst, rel)
            parts.append(f"I_{q:g} {name} {rel:.1e}")
    verdict(1, worst < 0.01, f"worst relative error {worst:.2e} (limit 1e-2): " + ", ".join(parts))


def test_02_cross_estimator_agreement(verdict):
    worst, where = 0.0, ""
    for k, (name, P) in enumerate(small_battery()):
        for j, q in enumerate(Q_VALUES):
            a = chord.chord_integral(P, q, SAMPLES, seed=100 * k + j)
            b = chord.chord_integral_lines(P, q, SAMPLES, seed=100 * k + j + 50)
            g = gap(a.value, a.std_error, b.value, b.std_error)
            if g > worst:
                worst, where = g, f"{name} q={q:g}"
    verdict(2, worst <= 3.0, f"worst gap {worst:.2f} sigma at {where} (limit 3) over 25 pairs")


def test_03_discrete_variational_formula(verdict):
    rng = np.random.default_rng(2023)
    gaps, rels = [], []
    for k in range(10):
        n = 2 if k < 6 else 3
        P = random_polytope(rng, int(rng.integers(5, 9)) if n == 2 else int(rng.integers(7, 11)), n)
        beta = rng.standard_normal(P.normals.shape[0])
        q = float(rng.choice(Q_VALUES))
        res = variational_check(P.spec, beta, q)
        gaps.append(res.gap)
        rels.append(abs(res.lhs - res.rhs) / abs(res.rhs))
    euler = []
    for n, P in ((2, random_polytope(rng, 7, 2)), (3, random_polytope(rng, 9, 3))):
        for q in (0.5, 2.0):
            I = chord.chord_integral_quadrature(P, q).value
            F = chord.chord_measure(P, q, method="mc", samples_per_facet=2 * 10**5, seed=n)
            euler.append(abs(float(P.support @ F.values) - (n + q - 1) * I) / ((n + q - 1) * I))
    ok = max(gaps) <= 3.0 and max(euler) < 0.01
    verdict(3, ok, f"worst variational gap {max(gaps):.2f} sigma over 10 triples (limit 3), "
                   f"largest relative difference {max(rels):.1e}; "
                   f"worst Euler relative error {max(euler):.1e} with MC chord measures (limit 1e-2)")


def test_04_total_measure_identity(verdict):
    worst, where = 0.0, ""
    for k, (name, P) in enumerate(default_battery(0)):
        for j, q in enumerate(Q_VALUES):
            G = chord.cone_chord_measure(P, q)
            I = chord.chord_integral_lines(P, q, SAMPLES, seed=10 * k + j)
            g = gap(G.total, G.total_uncertainty, I.value, I.std_error)
            if g > worst:
                worst, where = g, f"{name} q={q:g}"
    verdict(4, worst <= 3.0, f"worst gap |G_q| vs line-form I_q {worst:.2f} sigma at {where} (limit 3)")


def test_05_q1_reduction(verdict):
    exact_err, mc_err = 0.0, 0.0
    for k, (name, P) in enumerate(default_battery(0)):
        areas = P.facet_areas
        F = chord.chord_measure(P, 1.0, method="quadrature")
        exact_err = max(exact_err, float(np.max(np.abs(F.values - areas))))
        Fm = chord.chord_measure(P, 1.0, method="mc", samples_per_facet=2 * 10**5, seed=k)
        live = areas > 0
        mc_err = max(mc_err, float(np.max(np.abs(Fm.values[live] - areas[live]) / areas[live])))
    verdict(5, exact_err == 0.0 and mc_err < 0.01,
            f"quadrature F_1 minus areas {exact_err:.1e} (must be 0); worst MC relative error {mc_err:.1e} (limit 1e-2)")


def test_06_inner_solver(verdict):
    rng = np.random.default_rng(6)
    stat, homog = 0.0, 0.0
    for k in range(20):
        n = 2 if k % 2 == 0 else 3
        count = int(rng.integers(n + 2, 3 * n + 3))
        mu = DiscreteMeasure(random_normals(rng, count, n), rng.uniform(0.5, 2.0, count))
        z = rng.uniform(0.7, 1.5, count)
        p = float(rng.choice([0.0, 0.3, 0.7]))
        xi = xi_star(z, mu, p)
        stat = max(stat, stationarity_residual(z, xi, mu, p) / np.linalg.norm(mu.weights))
        homog = max(homog, float(np.max(np.abs(xi_star(2 * z, mu, p) - 2 * xi))))
    # asymmetric square: weight 2 on e1, maximizer of 2 log(1-x) + log(1+x) + log(1-y) + log(1+y)
    mu = DiscreteMeasure(cube_normals(2), [2.0, 1.0, 1.0, 1.0])
    xi = xi_star(np.ones(4), mu, 0.0)
    g = -1 + (np.arange(1000) + 0.5) * 2 / 1000
    X, Y = np.meshgrid(g, g, indexing="ij")
    vals = 2 * np.log(1 - X) + np.log(1 + X) + np.log(1 - Y) + np.log(1 + Y)
    k = np.unravel_index(np.argmax(vals), vals.shape)
    grid = float(np.linalg.norm(xi - [X[k], Y[k]]))
    ok = stat < 1e-10 and homog < 1e-9 and grid < 2e-3
    verdict(6, ok, f"stationarity {stat:.1e} x |alpha| (limit 1e-10); homogeneity {homog:.1e} "
                   f"(limit 1e-9); grid distance {grid:.1e} (limit 2e-3)")


def test_07_symmetric_cube_solve(verdict):
    mu = DiscreteMeasure(cube_normals(3), np.full(6, 4.0))
    rep = solve(mu, SolverConfig(p=0.5, q=1.0))
    d = hausdorff_distance(rep.polytope, cube())
    rel_d = d / (2 * math.sqrt(3))
    ok = rep.max_rel < 0.02 and rel_d < 0.02
    verdict(7, ok, f"max_rel {rep.max_rel:.1e} (limit 2e-2); Hausdorff to [-1,1]^3 {rel_d:.1e} "
                   f"of the diameter (limit 2e-2)")


@pytest.mark.slow
def test_08_self_consistency_solves(verdict):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, gp = 0.0, True
    for _ in range(5):
        v = random_normals(rng, 8, 2)
        mu = DiscreteMeasure(v, rng.uniform(0.5, 2.0, 8))
        gp = gp and general_position_check(mu.directions, 2)
        for p, q in ((0.0, 2.0), (0.5, 1.5)):
            worst = max(worst, solve(mu, SolverConfig(p=p, q=q)).max_rel)
    minutes = (time.perf_counter() - start) / 60
    ok = gp and worst < 0.03 and minutes <= 15
    verdict(8, ok, f"worst max_rel {worst:.1e} over 10 solves (limit 3e-2); "
                   f"{minutes:.1f} min (limit 15)")


def test_09_discretizer_sandwich(verdict):
    rows, ok = [], True
    vmf2 = VonMisesFisherDensity(2, [0.6, 0.8], 5.0, mass=3.0)
    vmf3 = VonMisesFisherDensity(3, [0.0, 0.0, 1.0], 5.0, mass=3.0)
    cases = [(d, m) for d in (UniformDensity(2), vmf2) for m in (1, 2, 4, 16)]
    cases += [(d, m) for d in (UniformDensity(3), vmf3) for m in (1, 2)]
    for density, m in cases:
        assert m >= sandwich_threshold(density.dim)
        mu = discretize(density, m, seed=m)
        Q = wulff_shape(HalfspaceSpec(mu.directions, np.ones(mu.size)))
        rmax = float(np.max(np.linalg.norm(Q.vertices, axis=1)))
        inner = float(np.min(Q.support))
        mass = abs(total_mass(mu) - density.mass)
        ok = ok and rmax < 2.0 and inner >= 1 - 1e-12 and mass <= 1e-12
        rows.append(f"{density.name} n={density.dim} m={m}: R={rmax:.3f} mass err {mass:.0e}")
    verdict(9, ok, f"thresholds n=2:{sandwich_threshold(2)} n=3:{sandwich_threshold(3)}; " + "; ".join(rows))


def test_10_admissibility_examples(verdict):
    e1, e2 = [1.0, 0.0], [0.0, 1.0]
    checks = {}
    checks["mass {e1,-e1} = 2"] = total_mass(DiscreteMeasure([e1, [-1, 0]], [1, 1])) == 2.0
    checks["mass quarter weights = 1"] = total_mass(DiscreteMeasure(cube_normals(2), [0.25] * 4)) == 1.0
    try:
        DiscreteMeasure(np.empty((0, 2)), [])
        checks["empty atoms rejected"] = False
    except InvalidMeasureError:
        checks["empty atoms rejected"] = True
    checks["hemisphere {+-e1,+-e2}"] = hemisphere_check(DiscreteMeasure(cube_normals(2), [1] * 4)) is True
    checks["hemisphere {e1,e2}"] = hemisphere_check(DiscreteMeasure([e1, e2], [1, 1])) is False
    checks["general position {+-e1,+-e2}"] = general_position_check(cube_normals(2), 2) is False
    t = np.radians([0.0, 97.0, 185.0, 273.0])
    checks["general position 0,97,185,273 deg"] = general_position_check(
        np.stack([np.cos(t), np.sin(t)], axis=1), 2) is True
    checks["general position 20 random in R^3"] = general_position_check(
        random_normals(np.random.default_rng(0), 20, 3), 3) is True
    d = -np.array([1.0, 1.0]) / math.sqrt(2)
    rep = subspace_mass_check(DiscreteMeasure([e1, e2, d], [0.7, 0.15, 0.15]), 2.0)
    checks["subspace 0.7 on e1 fails, lambda_1 = 2/3"] = (
        not rep.passes and rep.bound_lambda[1] == 2 / 3 and abs(rep.worst_ratio - 0.7) < 1e-12)
    rep = subspace_mass_check(DiscreteMeasure(np.stack([np.cos(t), np.sin(t)], axis=1), [0.25] * 4), 2.0)
    checks["subspace equal weights pass at 0.25"] = rep.passes and abs(rep.worst_ratio - 0.25) < 1e-12
    checks["lambda n=3 q=1.5 is 3/7, 5/7"] = (subspace_bound(1, 3, 1.5) == 3 / 7
                                             and subspace_bound(2, 3, 1.5) == 5 / 7)
    failed = [k for k, v in checks.items() if not v]
    verdict(10, not failed, f"{len(checks) - len(failed)}/{len(checks)} examples reproduced"
                            + (f"; failed: {failed}" if failed else ""))


def test_11_homogeneity_and_translation(verdict):
    rng = np.random.default_rng(17)
    shapes = [("square", wulff_shape(HalfspaceSpec(cube_normals(2), np.ones(4)))), ("cube", cube()),
              ("polygon", random_polytope(rng, 7, 2)), ("polytope", random_polytope(rng, 9, 3))]
    worst, where = 0.0, ""

    def record(g, label):
        nonlocal worst, where
        if g > worst:
            worst, where = g, label

    def rel(a, b):
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.max(np.abs(b))))

    worst_rel = 0.0

    for name, P in shapes:
        n = P.dim
        P_t = wulff_shape(P.spec.translated(rng.uniform(-0.5, 0.5, n)))
        for q in Q_VALUES:
            I, F = chord.quadrature_functionals(P, q)
            # round-off floor for the exactly computed q = 1 case
            fl = 1e-12
            It, Ft = chord.quadrature_functionals(P_t, q)
            record(gap(It.value, It.uncertainty, I.value, I.uncertainty, fl * I.value), f"{name} translate I q={q:g}")
            for a, ua, b, ub in zip(Ft.values, Ft.uncertainties, F.values, F.uncertainties):
                record(gap(a, ua, b, ub, fl * max(F.values)), f"{name} translate F q={q:g}")
            worst_rel = max(worst_rel, rel(It.value, I.value), rel(Ft.values, F.values))
            for t in (0.5, 2.0):
                P_s = wulff_shape(P.spec.scaled(t))
                Is, Fs = chord.quadrature_functionals(P_s, q)
                c = t ** (n + q - 1)
                record(gap(Is.value, Is.uncertainty, c * I.value, c * I.uncertainty, fl * Is.value),
                       f"{name} scale I q={q:g} t={t:g}")
                worst_rel = max(worst_rel, rel(Is.value, c * I.value))
                # F_q is the derivative of I_q in the support values: one degree less
                c = t ** (n + q - 2)
                for a, ua, b, ub in zip(Fs.values, Fs.uncertainties, c * F.values, c * F.uncertainties):
                    record(gap(a, ua, b, ub, fl * max(Fs.values)), f"{name} scale F q={q:g} t={t:g}")
                worst_rel = max(worst_rel, rel(Fs.values, c * F.values))
                for p in (0.0, 0.3, 0.7):
                    A = chord.lp_chord_measure(P_s, p, q, F=Fs)
                    B = chord.lp_chord_measure(P, p, q, F=F)
                    cp = t ** (n + q - 1 - p)
                    for a, ua, b, ub in zip(A.values, A.uncertainties, cp * B.values, cp * B.uncertainties):
                        record(gap(a, ua, b, ub, fl * max(A.values)), f"{name} scale Fpq p={p:g} q={q:g} t={t:g}")
                    worst_rel = max(worst_rel, rel(A.values, cp * B.values))
        # Monte Carlo line form with independent streams on P, t P and the translate
        for j, q in enumerate((0.5, 2.0)):
            base = chord.chord_integral_lines(P, q, SAMPLES, seed=j)
            moved = chord.chord_integral_lines(P_t, q, SAMPLES, seed=j + 10)
            record(gap(moved.value, moved.std_error, base.value, base.std_error), f"{name} MC translate q={q:g}")
            big = chord.chord_integral_lines(wulff_shape(P.spec.scaled(2.0)), q, SAMPLES, seed=j + 20)
            c = 2.0 ** (n + q - 1)
            record(gap(big.value, big.std_error, c * base.value, c * base.std_error), f"{name} MC scale q={q:g}")
    verdict(11, worst <= 3.0, f"worst gap {worst:.2f} sigma at {where} (limit 3); "
                              f"largest quadrature relative deviation {worst_rel:.1e}")
