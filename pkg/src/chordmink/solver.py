"""Variational solver for the discrete L_p chord Minkowski problem.

The inner problem maximizes the concave functional

    Phi_p(z, xi) = sum_j alpha_j (z_j - xi.v_j)^p      (0 < p < 1)
    Phi_0(z, xi) = sum_j alpha_j log(z_j - xi.v_j)

over xi in the interior of [z].  The outer problem minimizes
E(z) = Phi_p(z, xi_p(z)) over offsets z subject to I_q([z]) = |mu|.  At a
constrained minimizer with xi_p(z) = o, the L_p chord measure of [z] is a
constant multiple of mu, and one homogeneity rescale finishes the job.
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np

from . import chord
from .errors import (AdmissibilityError, BudgetExceededError, ConvergenceError,
                     DegenerateShapeError, NotInteriorError)
from .measure import (DiscreteMeasure, discretize, general_position_check, hemisphere_check,
                      subspace_mass_check, total_mass)
from .polytope import (HalfspaceSpec, Polytope, chebyshev_center, hausdorff_distance,
                       wulff_shape)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    p: float = 0.5
    q: float = 1.0
    inner_tol: float = 1e-10
    outer_tol: float = 1e-6
    max_outer_iters: int = 2000
    max_inner_iters: int = 200
    chord_samples: int = 200_000
    seed: int = 0
    shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 40
    starts: int = 3
    start_jitter: float = 0.1
    method: str = "auto"
    quadrature_level: int = 0
    newton: bool = True
    newton_switch: float = 1.0
    max_newton_iters: int = 200

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError("p must lie in [0, 1)")
        if not self.q > 0.0:
            raise ValueError("q must be positive")
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("auto", "quadrature", "mc"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.newton_switch <= 0:
            raise ValueError("newton_switch must be positive")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class SolutionReport:
    polytope: Polytope
    z_star: np.ndarray
    xi_star: np.ndarray
    achieved_measure: np.ndarray
    achieved_uncertainty: np.ndarray
    target: np.ndarray
    residuals: np.ndarray
    objective_trace: List[float]
    scale_factor: float
    scale_factor_closed_form: float
    diagnostics: dict
    config: SolverConfig

    @property
    def max_rel(self) -> float:
        return float(np.max(self.residuals))

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", False))

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "polytope": self.polytope.to_json(),
            "z_star": self.z_star.tolist(),
            "xi_star": self.xi_star.tolist(),
            "residuals": [
                {"direction": v.tolist(), "target": float(t), "achieved": float(a),
                 "uncertainty": float(u), "rel_error": float(r)}
                for v, t, a, u, r in zip(self.polytope.normals, self.target, self.achieved_measure,
                                         self.achieved_uncertainty, self.residuals)
            ],
            "max_rel": self.max_rel,
            "scale_factor": self.scale_factor,
            "scale_factor_closed_form": self.scale_factor_closed_form,
            "scale_discrepancy": abs(self.scale_factor - self.scale_factor_closed_form),
            "objective_trace": list(self.objective_trace),
            "diagnostics": _jsonable(self.diagnostics),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# inner problem

def _slacks(z, xi, normals):
    return np.asarray(z, dtype=float) - normals @ np.asarray(xi, dtype=float)


def phi(z, xi, mu: DiscreteMeasure, p: float) -> float:
    """Phi_p(z, xi); -inf when p = 0 and xi touches the boundary."""
    s = _slacks(z, xi, mu.directions)
    scale = max(1.0, float(np.max(np.abs(z))))
    if np.any(s < -1e-12 * scale):
        raise NotInteriorError("xi lies outside [z]")
    s = np.maximum(s, 0.0)
    if p == 0:
        if np.any(s == 0):
            return -math.inf
        return float(math.fsum(mu.weights * np.log(s)))
    return float(math.fsum(mu.weights * s**p))


def _phi_parts(s, alpha, normals, p):
    """Value, gradient and Hessian of xi -> Phi_p at slacks ``s``."""
    if p == 0:
        val = float(alpha @ np.log(s))
        w1 = alpha / s
        grad = -(w1 @ normals)
        hess = -(normals.T * (alpha / s**2)) @ normals
    else:
        val = float(alpha @ s**p)
        grad = -p * ((alpha * s ** (p - 1)) @ normals)
        hess = p * (p - 1) * (normals.T * (alpha * s ** (p - 2))) @ normals
    return val, grad, hess


def stationarity_residual(z, xi, mu: DiscreteMeasure, p: float) -> float:
    """|sum_j (z_j - xi.v_j)^{p-1} alpha_j v_j|."""
    s = _slacks(z, xi, mu.directions)
    return float(np.linalg.norm((mu.weights * s ** (p - 1.0)) @ mu.directions))


def xi_star(z, mu: DiscreteMeasure, p: float, tol: float = 1e-10, max_iter: int = 200,
            return_trace: bool = False):
    """Unique maximizer of Phi_p(z, .) over int [z], by damped Newton.

    Starts at the Chebyshev center.  Steps are limited so every slack stays
    above 1% of the current smallest slack, then backtracked until Phi
    increases sufficiently.  Converged when the stationarity residual drops
    below ``tol * |alpha|``.
    """
    z = np.asarray(z, dtype=float)
    v, a = mu.directions, mu.weights
    spec = HalfspaceSpec(v, z, check=False)
    xi, radius = chebyshev_center(spec)
    scale = max(1.0, float(np.max(np.abs(z))))
    if radius <= 1e-9 * scale:
        raise DegenerateShapeError("[z] has empty interior")
    target = tol * float(np.linalg.norm(a))
    trace = []
    for it in range(max_iter):
        s = z - v @ xi
        res = float(np.linalg.norm((a * s ** (p - 1.0)) @ v))
        val, grad, hess = _phi_parts(s, a, v, p)
        trace.append({"iter": it, "phi": val, "residual": res})
        step = np.linalg.solve(hess, -grad)
        if res < target:
            # one polishing Newton step: quadratic convergence takes the
            # residual to round-off; kept only if it helps
            s_new = z - v @ (xi + step)
            if np.all(s_new > 0):
                res_new = float(np.linalg.norm((a * s_new ** (p - 1.0)) @ v))
                if res_new < res:
                    xi = xi + step
            return (xi, trace) if return_trace else xi
        ds = v @ step  # slack change is -t * ds
        grow = ds > 0
        t = 1.0
        if np.any(grow):
            # keep s - t ds >= 0.01 min(s)
            floor = 0.01 * s.min()
            t = min(1.0, float(np.min((s[grow] - floor) / ds[grow])))
        slope = float(grad @ step)
        flat = abs(slope) <= 1e-12 * max(1.0, abs(val))
        for _ in range(60):
            s_new = s - t * ds
            if np.all(s_new > 0):
                new_val = _phi_parts(s_new, a, v, p)[0]
                if new_val >= val + 1e-4 * t * slope:
                    break
                # Phi is flat to round-off here, so judge the step by the residual
                if flat and np.linalg.norm((a * s_new ** (p - 1.0)) @ v) < res:
                    break
            t *= 0.5
        else:
            break
        if t * np.linalg.norm(step) <= 1e-15 * scale:
            # Newton step below round-off: we are as close as arithmetic allows
            s = z - v @ (xi + t * step)
            res = float(np.linalg.norm((a * s ** (p - 1.0)) @ v))
            if res < 100 * target:
                xi = xi + t * step
                return (xi, trace) if return_trace else xi
            break
        xi = xi + t * step
    raise ConvergenceError(
        f"inner Newton did not reach residual {target:.2e} in {max_iter} iterations", trace
    )


# ---------------------------------------------------------------------------
# outer problem

@dataclass
class OuterEval:
    z: np.ndarray
    polytope: Polytope
    xi: np.ndarray
    E: float
    grad_E: np.ndarray
    I: chord.ChordEstimate
    F: chord.MeasureEstimate
    constraint: float

    @property
    def grad_c(self):
        return self.F.values


def _method(config: SolverConfig, n: int) -> str:
    if config.method == "auto":
        return "quadrature" if n in (2, 3) else "mc"
    return config.method


def _functionals(P: Polytope, config: SolverConfig, level: int, samples: int, seed,
                 estimate_error: bool = False):
    method = _method(config, P.dim)
    if method == "quadrature":
        return chord.quadrature_functionals(P, config.q, True, level, estimate_error)
    I = chord.chord_integral(P, config.q, samples, seed)
    F = chord.chord_measure(P, config.q, "mc", samples, seed)
    return I, F


def _energy_grad(s, alpha, p):
    return alpha / s if p == 0 else p * alpha * s ** (p - 1.0)


def outer_objective_and_gradient(z, mu: DiscreteMeasure, p: float, q: float,
                                 config: Optional[SolverConfig] = None, level: int = 0,
                                 seed=None) -> OuterEval:
    """E(z), dE/dz, c(z) = I_q([z]) - |mu| and dc/dz = F_q([z], .)."""
    config = config or SolverConfig(p=p, q=q)
    if config.p != p or config.q != q:
        config = replace(config, p=p, q=q)
    z = np.asarray(z, dtype=float)
    P = wulff_shape(HalfspaceSpec(mu.directions, z, check=False))
    xi = xi_star(z, mu, p, config.inner_tol, config.max_inner_iters)
    s = z - mu.directions @ xi
    E = phi(z, xi, mu, p)
    gE = _energy_grad(s, mu.weights, p)
    I, F = _functionals(P, config, level, config.chord_samples,
                        config.seed if seed is None else seed)
    return OuterEval(z, P, xi, E, gE, I, F, I.value - total_mass(mu))


def kkt_residual(grad_E, grad_c) -> float:
    """|grad E - nu grad c| / |grad E| with the least-squares multiplier nu."""
    nu = float(grad_E @ grad_c) / float(grad_c @ grad_c)
    return float(np.linalg.norm(grad_E - nu * grad_c) / np.linalg.norm(grad_E))


def energy_hessian(z, mu: DiscreteMeasure, p: float) -> np.ndarray:
    """Hessian of E(z) = Phi_p(z, xi_p(z)) at offsets with xi_p(z) = o.

    The inner maximizer moves with z, which contributes the Schur complement
    term through the implicit function theorem.
    """
    v, a = mu.directions, mu.weights
    z = np.asarray(z, dtype=float)
    d2 = -a / z**2 if p == 0 else p * (p - 1.0) * a * z ** (p - 2.0)
    dv = d2[:, None] * v
    return np.diag(d2) - dv @ np.linalg.solve(v.T @ dv, dv.T)


def chord_hessian(z, mu: DiscreteMeasure, config: SolverConfig, level: int) -> np.ndarray:
    """Hessian of I_q([z]) by differences of the quadrature chord measure.

    For q = 1 the chord measure is the facet area vector, which is piecewise
    linear in z, so forward differences are exact; otherwise central
    differences are used.
    """
    v = mu.directions
    z = np.asarray(z, dtype=float)
    N = len(z)
    h = 1e-6 * float(np.max(np.abs(z)))

    def grad(w):
        P = wulff_shape(HalfspaceSpec(v, w, check=False))
        return _functionals(P, config, level, config.chord_samples, config.seed)[1].values

    H = np.empty((N, N))
    base = grad(z) if config.q == 1.0 else None
    for j in range(N):
        e = np.zeros(N)
        e[j] = h
        if base is not None:
            H[:, j] = (grad(z + e) - base) / h
        else:
            H[:, j] = (grad(z + e) - grad(z - e)) / (2 * h)
    return 0.5 * (H + H.T)


def _newton_direction(state, mu, p, H_I):
    """Modified Newton step on the tangent space of {I_q = |mu|} modulo translations."""
    z, g, F = state.z, state.grad_E, state.grad_c
    nu = float(g @ F) / float(F @ F)
    H = energy_hessian(z, mu, p) - nu * H_I
    A = np.vstack([F / np.linalg.norm(F), mu.directions.T])
    # orthonormal basis of the null space of A
    _, sv, vt = np.linalg.svd(A)
    basis = vt[len(sv):].T
    Hr = basis.T @ H @ basis
    Hr = 0.5 * (Hr + Hr.T)
    gr = basis.T @ (g - nu * F)
    lam, Q = np.linalg.eigh(Hr)
    # negative curvature directions are flipped rather than shifting the whole
    # spectrum, which keeps a descent direction without crushing the step
    floor = 1e-8 * max(float(np.max(np.abs(lam))), 1e-300)
    lam = np.maximum(np.abs(lam), floor)
    step_r = -Q @ ((Q.T @ gr) / lam)
    predicted = -float(gr @ step_r)
    return basis @ step_r, predicted


class _Normalizer:
    """Map arbitrary offsets to a tight, centered, constraint-satisfying point."""

    def __init__(self, mu, config, budget):
        self.mu = mu
        self.config = config
        self.mass = total_mass(mu)
        self.n = mu.dim
        self.budget = budget
        self.evals = 0

    def __call__(self, z, level, samples, seed) -> OuterEval:
        mu, cfg = self.mu, self.config
        v = mu.directions
        P = wulff_shape(HalfspaceSpec(v, z, check=False))
        z = np.minimum(P.support, z)  # tighten
        xi = xi_star(z, mu, cfg.p, cfg.inner_tol, cfg.max_inner_iters)
        z = z - v @ xi  # recenter so the inner maximizer is the origin
        P = wulff_shape(HalfspaceSpec(v, z, check=False))
        I, F = _functionals(P, cfg, level, samples, seed)
        self.evals += 1
        lam = (self.mass / I.value) ** (1.0 / (self.n + cfg.q - 1.0))
        z = lam * z
        P = wulff_shape(HalfspaceSpec(v, z, check=False))
        deg = self.n + cfg.q - 1.0
        I = chord.ChordEstimate(I.value * lam**deg, I.std_error * lam**deg, I.samples,
                                I.estimator, I.error_estimate * lam**deg)
        F = F.scaled(np.full(len(z), lam ** (deg - 1.0)))
        xi0 = np.zeros(self.n)
        E = phi(z, xi0, mu, cfg.p)
        gE = _energy_grad(z, mu.weights, cfg.p)
        return OuterEval(z, P, xi0, E, gE, I, F, I.value - self.mass)


def _newton_phase(state, mu, config, level, evaluate, trace):
    """Newton iterations from a normalized state; returns (state, kkt, converged, steps)."""
    H_I = None
    kkt = kkt_residual(state.grad_E, state.grad_c)
    for k in range(config.max_newton_iters):
        if kkt < config.outer_tol:
            return state, kkt, True, k
        if H_I is None:
            H_I = chord_hessian(state.z, mu, config, level)
        dz, predicted = _newton_direction(state, mu, config.p, H_I)
        roundoff = predicted <= 1e-13 * max(1.0, abs(state.E))
        accepted, t = None, 1.0
        for _ in range(30):
            try:
                trial = evaluate(state.z + t * dz)
            except (DegenerateShapeError, ConvergenceError, NotInteriorError, np.linalg.LinAlgError):
                t *= 0.5
                continue
            trial_kkt = kkt_residual(trial.grad_E, trial.grad_c)
            if trial.E <= state.E - config.sufficient_decrease * t * predicted:
                accepted = trial
                break
            # at round-off level E cannot rank the points, the residual can
            if roundoff and trial_kkt < kkt and trial.E <= state.E + 1e-13 * max(1.0, abs(state.E)):
                accepted = trial
                break
            t *= 0.5
        if accepted is None:
            if H_I is not None and k > 0:
                H_I = None  # retry once with a fresh Hessian
                continue
            return state, kkt, False, k
        new_kkt = kkt_residual(accepted.grad_E, accepted.grad_c)
        # keep the Hessian while full steps contract the residual quickly
        if t < 1.0 or new_kkt > 0.25 * kkt:
            H_I = None
        state, kkt = accepted, new_kkt
        trace.append(state.E)
        logger.debug("newton step %d: t %.3g, KKT %.3e", k, t, kkt)
    return state, kkt, kkt < config.outer_tol, config.max_newton_iters


@dataclass
class OuterResult:
    z: np.ndarray
    state: OuterEval
    kkt: float
    converged: bool
    iterations: int
    trace: List[float]
    reason: str
    level: int
    samples: int
    evaluations: int
    newton_steps: int = 0


def outer_minimize(mu: DiscreteMeasure, config: SolverConfig, z0=None,
                   seed_offset: int = 0) -> OuterResult:
    """Projected gradient descent in log-offsets with Barzilai-Borwein steps,
    finished by Newton steps once the KKT residual drops below
    ``config.newton_switch`` (quadrature path only).

    Each trial point is tightened, recentered at its inner maximizer and
    rescaled onto I_q = |mu|, so every accepted iterate is feasible.
    """
    n, N = mu.dim, mu.size
    level = config.quadrature_level
    samples = config.chord_samples
    method = _method(config, n)
    norm = _Normalizer(mu, config, None)
    seed_base = np.random.SeedSequence([config.seed, seed_offset])
    eval_counter = [0]

    def evaluate(z):
        eval_counter[0] += 1
        seed = np.random.SeedSequence(seed_base.entropy, spawn_key=(seed_offset, eval_counter[0]))
        return norm(z, level, samples, seed)

    z = np.ones(N) if z0 is None else np.asarray(z0, dtype=float)
    state = evaluate(z)
    trace = [state.E]
    step = None
    prev = None
    failures = 0
    reason = "iteration budget exhausted"
    converged = False
    kkt = math.inf
    it = 0
    stall = 0
    use_newton = config.newton and method == "quadrature"
    newton_steps = 0
    for it in range(1, config.max_outer_iters + 1):
        gE = state.z * state.grad_E
        gI = state.z * state.grad_c
        direction = -(gE - (gE @ gI) / (gI @ gI) * gI)
        kkt = kkt_residual(state.grad_E, state.grad_c)
        if kkt < config.outer_tol:
            converged, reason = True, "KKT residual below tolerance"
            break
        if use_newton and kkt < config.newton_switch:
            state, kkt, converged, steps = _newton_phase(state, mu, config, level, evaluate, trace)
            newton_steps += steps
            if converged:
                reason = "KKT residual below tolerance"
                break
            # fall back to gradient steps from wherever Newton stopped
            logger.info("Newton phase stopped at KKT %.3e; continuing with gradient steps", kkt)
            use_newton = False
            prev, step = None, None
            continue
        if prev is not None:
            s_vec = np.log(state.z) - np.log(prev[0])
            y_vec = prev[1] - direction
            sy = float(s_vec @ y_vec)
            step = float(s_vec @ s_vec) / sy if sy > 0 else None
        if step is None or not np.isfinite(step):
            step = 0.1 / max(1e-300, float(np.max(np.abs(direction))))
        step = min(step, 1.0 / max(1e-300, float(np.max(np.abs(direction)))))
        decrease = float(direction @ direction)
        accepted = None
        t = step
        for _ in range(config.max_backtracks):
            try:
                trial = evaluate(state.z * np.exp(t * direction))
            except (DegenerateShapeError, ConvergenceError, np.linalg.LinAlgError):
                t *= config.shrink
                continue
            if trial.E <= state.E - config.sufficient_decrease * t * decrease:
                accepted = trial
                break
            t *= config.shrink
        if accepted is None:
            failures += 1
            step = None
            if failures >= 2:
                failures = 0
                if method == "quadrature":
                    if level + 1 < len(chord._linequad.LEVELS[n]):
                        level += 1
                        logger.info("line search failed twice; raising quadrature level to %d", level)
                        state = evaluate(state.z)
                        continue
                    reason = "line search failed at the finest quadrature level"
                    break
                samples *= 2
                logger.info("line search failed twice; doubling samples to %d", samples)
                state = evaluate(state.z)
                continue
            continue
        failures = 0
        rel_change = abs(accepted.E - state.E) / max(1.0, abs(state.E))
        stall = stall + 1 if rel_change < 1e-15 else 0
        prev = (state.z, direction)
        state = accepted
        trace.append(state.E)
        if stall >= 10:
            reason = "objective stalled"
            break
    else:
        kkt = kkt_residual(state.grad_E, state.grad_c)
        converged = kkt < config.outer_tol
    return OuterResult(state.z, state, kkt, converged, it, trace, reason, level, samples,
                       norm.evals, newton_steps)


# ---------------------------------------------------------------------------
# extraction and the driver

def closed_form_scale(z, mu: DiscreteMeasure, p: float, q: float) -> float:
    """Scale factor predicted at an exact minimizer with I_q([z]) = |mu|."""
    d = mu.dim + q - 1.0
    if p == 0:
        return (1.0 / d) ** (1.0 / d)
    Phi = phi(z, np.zeros(mu.dim), mu, p)
    return (Phi / (d * total_mass(mu))) ** (1.0 / (d - p))


def extract_solution(z_star, mu: DiscreteMeasure, p: float, q: float,
                     config: Optional[SolverConfig] = None, diagnostics=None,
                     trace=None, level: Optional[int] = None) -> SolutionReport:
    """Rescale [z*] so that its L_p chord measure has the mass of mu."""
    config = config or SolverConfig(p=p, q=q)
    if config.p != p or config.q != q:
        config = replace(config, p=p, q=q)
    level = config.quadrature_level if level is None else level
    z_star = np.asarray(z_star, dtype=float)
    n = mu.dim
    d = n + q - 1.0
    P0 = wulff_shape(HalfspaceSpec(mu.directions, z_star, check=False))
    _, F0 = _functionals(P0, config, level, config.chord_samples, config.seed, estimate_error=True)
    Fp0 = chord.lp_chord_measure(P0, p, q, F=F0)
    total = Fp0.total
    if not total > 0:
        raise ConvergenceError("achieved measure has nonpositive total mass")
    t_emp = (total_mass(mu) / total) ** (1.0 / (d - p))
    t_cf = closed_form_scale(z_star, mu, p, q)
    P = wulff_shape(HalfspaceSpec(mu.directions, t_emp * z_star, check=False))
    achieved = Fp0.scaled(np.full(len(z_star), t_emp ** (d - p)))
    xi = xi_star(P.offsets, mu, p, config.inner_tol, config.max_inner_iters)
    resid = np.abs(achieved.values - mu.weights) / mu.weights
    diag = dict(diagnostics or {})
    center, r_in = chebyshev_center(P)
    diag.update(
        inner_radius=r_in,
        outer_radius=float(np.max(np.linalg.norm(P.vertices, axis=1))),
        scale_discrepancy=abs(t_emp - t_cf),
        achieved_total=achieved.total,
        achieved_total_uncertainty=achieved.total_uncertainty,
    )
    return SolutionReport(P, z_star, xi, achieved.values, achieved.uncertainties,
                          mu.weights.copy(), resid, list(trace or []), t_emp, t_cf, diag, config)


def check_admissible(mu: DiscreteMeasure, config: SolverConfig) -> List[str]:
    """Raise on hard violations; return warnings for sufficient-only conditions."""
    warnings = []
    if not hemisphere_check(mu):
        raise AdmissibilityError(
            "measure is concentrated on a closed hemisphere; no solution exists"
        )
    if config.p == 0:
        try:
            gp = general_position_check(mu.directions, mu.dim)
        except BudgetExceededError:
            gp = general_position_check(mu.directions, mu.dim, spot_check=True, seed=config.seed)
        if not gp:
            raise AdmissibilityError(
                "general position required for p=0: the discrete existence theorem assumes "
                "every n atom directions are linearly independent"
            )
        if 1.0 < config.q < mu.dim + 1.0:
            try:
                rep = subspace_mass_check(mu, config.q)
            except BudgetExceededError:
                rep = subspace_mass_check(mu, config.q, spot_check=True, seed=config.seed)
            if not rep.passes:
                msg = (f"subspace mass inequality fails in dimension {rep.worst_dimension} "
                       f"(ratio {rep.worst_ratio:.4f} vs bound "
                       f"{rep.bound_lambda[rep.worst_dimension]:.4f}); it is sufficient, "
                       "not necessary, so solving anyway")
                logger.warning(msg)
                warnings.append(msg)
    return warnings


def solve(mu: DiscreteMeasure, config: Optional[SolverConfig] = None) -> SolutionReport:
    """Multi-start outer minimization followed by extraction of the polytope."""
    config = config or SolverConfig()
    warnings = check_admissible(mu, config)
    rng = np.random.default_rng(config.seed)
    best = None
    runs = []
    t0 = time.perf_counter()
    for k in range(max(1, config.starts)):
        if k == 0:
            z0 = np.ones(mu.size)
        else:
            z0 = np.exp(config.start_jitter * rng.standard_normal(mu.size))
        try:
            res = outer_minimize(mu, config, z0, seed_offset=k)
        except (DegenerateShapeError, ConvergenceError) as exc:
            logger.warning("start %d failed: %s", k, exc)
            runs.append({"start": k, "error": str(exc)})
            continue
        logger.info("start %d: KKT %.3e after %d iterations, %d Newton steps (%s)", k, res.kkt,
                    res.iterations, res.newton_steps, res.reason)
        runs.append({"start": k, "kkt": res.kkt, "iterations": res.iterations,
                     "newton_steps": res.newton_steps, "objective": res.state.E,
                     "reason": res.reason})
        if best is None or res.kkt < best.kkt:
            best = res
    if best is None:
        raise ConvergenceError("every start failed", runs)
    diag = {
        "converged": best.converged,
        "kkt_residual": best.kkt,
        "iterations": best.iterations,
        "termination": best.reason,
        "quadrature_level": best.level,
        "chord_samples": best.samples,
        "evaluations": best.evaluations,
        "starts": runs,
        "warnings": warnings,
    }
    # wall time goes to the log only, so reports stay byte-identical across runs
    logger.info("solve finished in %.1f s", time.perf_counter() - t0)
    if not best.converged:
        logger.warning("solver did not converge: %s (KKT %.3e)", best.reason, best.kkt)
    return extract_solution(best.z, mu, config.p, config.q, config, diag, best.trace, best.level)


@dataclass
class ContinuousResult:
    resolutions: List[int]
    reports: List[SolutionReport]
    measures: List[DiscreteMeasure]
    hausdorff: List[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "resolutions": self.resolutions,
            "hausdorff_successive": self.hausdorff,
            "reports": [r.to_json() for r in self.reports],
        }


def solve_continuous(density, resolutions: Sequence[int] = (8, 16, 32),
                     config: Optional[SolverConfig] = None) -> ContinuousResult:
    """Discretize at each resolution, solve, and track successive Hausdorff distances."""
    config = config or SolverConfig()
    reports, measures = [], []
    for m in resolutions:
        mu = discretize(density, m, seed=config.seed)
        measures.append(mu)
        reports.append(solve(mu, config))
    dists = [hausdorff_distance(a.polytope, b.polytope) for a, b in zip(reports, reports[1:])]
    return ContinuousResult(list(resolutions), reports, measures, dists)
