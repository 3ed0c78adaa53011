"""Discrete measures on the unit sphere, admissibility checks, discretization."""
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.special import ive

from ._tolerances import DEFAULT, MAX_SUBSETS, SPOT_CHECK_SUBSETS
from .errors import BudgetExceededError, InvalidMeasureError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite sum of weighted point masses on S^{n-1}.

    ``directions`` is an (N, n) array of unit vectors and ``weights`` the
    matching positive masses.  Both arrays are made read-only.
    """

    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        v = np.array(self.directions, dtype=float, copy=True)
        a = np.array(self.weights, dtype=float, copy=True).reshape(-1)
        if v.ndim != 2 or v.shape[0] == 0:
            raise InvalidMeasureError("a measure needs at least one atom")
        if v.shape[1] < 2:
            raise InvalidMeasureError("dimension must be at least 2")
        if a.shape[0] != v.shape[0]:
            raise InvalidMeasureError("directions and weights differ in length")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(a)):
            raise InvalidMeasureError("non-finite atom data")
        norms = np.linalg.norm(v, axis=1)
        if np.any(np.abs(norms - 1.0) > DEFAULT.unit_norm):
            raise InvalidMeasureError("atom directions must be unit vectors")
        if np.any(a <= 0):
            raise InvalidMeasureError("atom weights must be positive")
        if v.shape[0] > 1:
            order = np.lexsort(v.T[::-1])
            s = v[order]
            # lexicographic neighbours catch exact and near-exact repeats cheaply;
            # the pairwise pass below is only run for moderate sizes
            if np.any(np.linalg.norm(np.diff(s, axis=0), axis=1) < DEFAULT.duplicate_direction):
                raise InvalidMeasureError("duplicate atom directions")
            if v.shape[0] <= 4000:
                g = v @ v.T
                d2 = np.clip(2.0 - 2.0 * g, 0.0, None)
                np.fill_diagonal(d2, np.inf)
                if np.sqrt(d2.min()) < DEFAULT.duplicate_direction:
                    raise InvalidMeasureError("duplicate atom directions")
        v.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "directions", v)
        object.__setattr__(self, "weights", a)

    @classmethod
    def from_atoms(cls, directions, weights, normalize=False):
        v = np.asarray(directions, dtype=float)
        if normalize:
            v = v / np.linalg.norm(v, axis=1, keepdims=True)
        return cls(v, weights)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    @property
    def size(self) -> int:
        return self.directions.shape[0]

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.directions, self.weights * factor)

    def rotated(self, rotation: np.ndarray) -> "DiscreteMeasure":
        v = self.directions @ np.asarray(rotation).T
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        return DiscreteMeasure(v, self.weights)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "atoms": [
                {"v": [float(c) for c in v], "alpha": float(a)}
                for v, a in zip(self.directions, self.weights)
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "DiscreteMeasure":
        """Parse the measure JSON format; directions are renormalized."""
        atoms = data.get("atoms")
        if not atoms:
            raise InvalidMeasureError("measure JSON has no atoms")
        v = np.array([atom["v"] for atom in atoms], dtype=float)
        a = np.array([atom["alpha"] for atom in atoms], dtype=float)
        dim = int(data.get("dim", v.shape[1]))
        if v.ndim != 2 or v.shape[1] != dim:
            raise InvalidMeasureError(f"atoms do not match declared dimension {dim}")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms == 0):
            raise InvalidMeasureError("zero atom direction")
        return cls(v / norms[:, None], a)


def total_mass(mu: DiscreteMeasure) -> float:
    return float(math.fsum(mu.weights))


def hemisphere_margin(directions: np.ndarray) -> float:
    """Value of max_{|u|_inf <= 1} min_i v_i . u.

    Positive means the directions fit in an open hemisphere.  The value is
    never negative (u = 0 is feasible), so it cannot by itself separate the
    closed-hemisphere boundary case; see :func:`hemisphere_check`.
    """
    v = np.asarray(directions, dtype=float)
    n_atoms, n = v.shape
    # variables (u, t); maximize t s.t. t - v_i.u <= 0
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-v, np.ones((n_atoms, 1))])
    bounds = [(-1.0, 1.0)] * n + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n_atoms), bounds=bounds, method="highs")
    return float(-res.fun)


def hemisphere_check(mu, tol: float = DEFAULT.hemisphere_feasibility) -> bool:
    """True iff the atoms are NOT contained in any closed hemisphere.

    Decided through the dual program: the atoms avoid every closed
    hemisphere exactly when they span R^n and admit a strictly positive
    combination sum lambda_i v_i = 0.  We maximize the smallest lambda_i
    over the simplex and compare against ``tol``.
    """
    v = mu.directions if isinstance(mu, DiscreteMeasure) else np.asarray(mu, dtype=float)
    n_atoms, n = v.shape
    if n_atoms < n + 1:
        return False
    if np.linalg.matrix_rank(v, tol=1e-10) < n:
        return False
    # variables (lambda, t); maximize t s.t. t - lambda_i <= 0, V^T lambda = 0, sum lambda = 1
    c = np.zeros(n_atoms + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-np.eye(n_atoms), np.ones((n_atoms, 1))])
    a_eq = np.vstack([np.hstack([v.T, np.zeros((n, 1))]), np.append(np.ones(n_atoms), 0.0)])
    b_eq = np.append(np.zeros(n), 1.0)
    bounds = [(0.0, None)] * n_atoms + [(None, None)]
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n_atoms), A_eq=a_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return False
    # scale-free: compare against tol relative to the uniform weight 1/N
    return bool(-res.fun * n_atoms > tol)


def _subset_count(n_items: int, k: int) -> int:
    return math.comb(n_items, k)


def _random_subsets(rng, n_items, k, count):
    # rows of k distinct indices; rows with a repeated index are redrawn
    if k >= n_items:
        return np.tile(np.arange(n_items), (count, 1))
    out = np.empty((0, k), dtype=np.intp)
    while out.shape[0] < count:
        idx = rng.integers(0, n_items, size=(count, k))
        s = np.sort(idx, axis=1)
        ok = np.all(np.diff(s, axis=1) > 0, axis=1)
        out = np.vstack([out, idx[ok]])
    return out[:count]


def _iter_subset_chunks(n_items, k, chunk=200_000):
    it = itertools.combinations(range(n_items), k)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def general_position_check(directions, dim: Optional[int] = None, spot_check: bool = False,
                           seed: int = 0, tol: float = DEFAULT.general_position_det) -> bool:
    """True iff every ``dim``-subset of ``directions`` is linearly independent.

    Exhaustive up to ``MAX_SUBSETS`` subsets.  Beyond that a
    :class:`BudgetExceededError` is raised unless ``spot_check`` is set, in
    which case ``SPOT_CHECK_SUBSETS`` random subsets are tested instead.
    """
    v = np.asarray(directions, dtype=float)
    if v.ndim != 2 or v.shape[0] == 0:
        raise InvalidMeasureError("direction list must be nonempty")
    n = v.shape[1] if dim is None else int(dim)
    n_items = v.shape[0]
    if n_items < n:
        # no n-subsets at all; vacuously true
        return True
    total = _subset_count(n_items, n)
    if total > MAX_SUBSETS:
        if not spot_check:
            raise BudgetExceededError(
                f"{total} subsets exceed the exhaustive budget of {MAX_SUBSETS}; "
                "enable spot checking to test random subsets instead"
            )
        rng = np.random.default_rng(seed)
        idx = _random_subsets(rng, n_items, n, SPOT_CHECK_SUBSETS)
        return bool(np.all(np.abs(np.linalg.det(v[idx])) > tol))
    for idx in _iter_subset_chunks(n_items, n):
        if np.any(np.abs(np.linalg.det(v[idx])) <= tol):
            return False
    return True


def subspace_bound(i: int, n: int, q: float) -> float:
    """Upper bound (i + min(i, q-1)) / (n + q - 1) on the mass fraction of an i-subspace."""
    fq = Fraction(q).limit_denominator(10**6)
    if float(fq) == q:
        val = (i + min(Fraction(i), fq - 1)) / (n + fq - 1)
        return float(val)
    return (i + min(i, q - 1.0)) / (n + q - 1.0)


@dataclass(frozen=True)
class SubspaceMassReport:
    passes: bool
    worst_ratio: float
    worst_subspace: np.ndarray
    worst_dimension: int
    bound_lambda: dict
    ratio_by_dimension: dict
    subspace_by_dimension: dict = field(repr=False)

    def to_json(self) -> dict:
        return {
            "passes": self.passes,
            "worst_ratio": self.worst_ratio,
            "worst_dimension": self.worst_dimension,
            "worst_subspace": np.asarray(self.worst_subspace).tolist(),
            "bound_lambda": {str(k): v for k, v in self.bound_lambda.items()},
            "ratio_by_dimension": {str(k): v for k, v in self.ratio_by_dimension.items()},
        }


def subspace_mass_check(mu: DiscreteMeasure, q: float, spot_check: bool = False,
                        seed: int = 0) -> SubspaceMassReport:
    """Check the subspace mass inequality for each dimension i = 1..n-1.

    Only spans of atom subsets are inspected.  For a discrete measure this is
    exact: any subspace can be shrunk to the span of the atoms it contains
    without losing mass.
    """
    n = mu.dim
    if not 1.0 < q < n + 1.0:
        raise ValueError(f"q must lie in (1, {n + 1}) for the subspace mass inequality")
    v = mu.directions
    a = mu.weights
    mass = total_mass(mu)
    n_atoms = mu.size
    budget = sum(_subset_count(n_atoms, i) for i in range(1, n))
    rng = np.random.default_rng(seed)
    if budget > MAX_SUBSETS and not spot_check:
        raise BudgetExceededError(
            f"{budget} subsets exceed the exhaustive budget of {MAX_SUBSETS}; "
            "enable spot checking to test random subsets instead"
        )
    ratios, bounds, spans = {}, {}, {}
    for i in range(1, n):
        bounds[i] = subspace_bound(i, n, q)
        if budget > MAX_SUBSETS:
            chunks = [_random_subsets(rng, n_atoms, i, SPOT_CHECK_SUBSETS // (n - 1))]
        else:
            chunks = _iter_subset_chunks(n_atoms, i, chunk=20_000)
        best, best_basis = -1.0, None
        for idx in chunks:
            basis = v[idx]  # (C, i, n)
            # orthonormal basis of each span; rank-deficient subsets are skipped
            qmat, rmat = np.linalg.qr(np.swapaxes(basis, 1, 2))
            diag = np.abs(np.diagonal(rmat, axis1=1, axis2=2))
            ok = np.all(diag > DEFAULT.general_position_det, axis=1)
            if not np.any(ok):
                continue
            qmat = qmat[ok]
            coef = np.einsum("cni,mn->cmi", qmat, v)
            resid = 1.0 - np.sum(coef**2, axis=2)
            inside = resid < DEFAULT.subspace_membership
            m = inside @ a / mass
            j = int(np.argmax(m))
            if m[j] > best:
                best = float(m[j])
                best_basis = basis[ok][j]
        ratios[i] = best
        spans[i] = best_basis
    slack = DEFAULT.strict_inequality_slack
    passes = all(ratios[i] < bounds[i] - slack for i in ratios)
    worst_i = max(ratios, key=lambda i: ratios[i] - bounds[i])
    return SubspaceMassReport(
        passes=bool(passes),
        worst_ratio=ratios[worst_i],
        worst_subspace=spans[worst_i],
        worst_dimension=worst_i,
        bound_lambda=bounds,
        ratio_by_dimension=ratios,
        subspace_by_dimension=spans,
    )


# ---------------------------------------------------------------------------
# densities and the sphere partition

def sphere_area(n: int) -> float:
    """(n-1)-dimensional measure of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


class Density:
    """Absolutely continuous measure on S^{n-1} given by a density function."""

    name = "custom"

    def __init__(self, dim: int, func: Callable[[np.ndarray], np.ndarray], mass: float):
        self.dim = int(dim)
        self._func = func
        self.mass = float(mass)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self._func(np.asarray(points, dtype=float))

    def to_json(self) -> dict:
        return {"family": self.name, "dim": self.dim, "mass": self.mass}


class UniformDensity(Density):
    name = "uniform"

    def __init__(self, dim: int, mass: float = 1.0):
        level = mass / sphere_area(dim)
        super().__init__(dim, lambda x: np.full(x.shape[0], level), mass)


class VonMisesFisherDensity(Density):
    """exp(kappa <mean, x>) normalized to total mass ``mass``."""

    name = "von-mises-fisher"

    def __init__(self, dim: int, mean, kappa: float, mass: float = 1.0):
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (dim,):
            raise ValueError("mean direction has the wrong dimension")
        mean = mean / np.linalg.norm(mean)
        kappa = float(kappa)
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        nu = dim / 2.0 - 1.0
        # exp(kappa (m.x - 1)) times the scaled normalizer keeps large kappa finite
        log_c = nu * math.log(kappa) - (dim / 2.0) * math.log(2 * math.pi) - math.log(ive(nu, kappa))
        self.mean = mean
        self.kappa = kappa
        super().__init__(dim, lambda x: mass * np.exp(log_c + kappa * (x @ mean - 1.0)), mass)

    def to_json(self) -> dict:
        d = super().to_json()
        d.update(mean=self.mean.tolist(), kappa=self.kappa)
        return d


def density_from_config(cfg: dict) -> Density:
    family = cfg.get("family", cfg.get("name"))
    dim = int(cfg["dim"])
    mass = float(cfg.get("mass", 1.0))
    if family == "uniform":
        return UniformDensity(dim, mass)
    if family in ("von-mises-fisher", "vmf"):
        return VonMisesFisherDensity(dim, cfg["mean"], cfg["kappa"], mass)
    raise ValueError(f"unknown density family {family!r}")


def angles_to_points(angles: np.ndarray) -> np.ndarray:
    """Hyperspherical angles (theta_1..theta_{n-2}, phi) -> unit vectors."""
    angles = np.atleast_2d(angles)
    m, k = angles.shape
    n = k + 1
    x = np.empty((m, n))
    s = np.ones(m)
    for j in range(k - 1):
        x[:, j] = s * np.cos(angles[:, j])
        s = s * np.sin(angles[:, j])
    x[:, n - 2] = s * np.cos(angles[:, -1])
    x[:, n - 1] = s * np.sin(angles[:, -1])
    return x


def points_to_angles(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    ang = np.empty((m, n - 1))
    for j in range(n - 2):
        tail = np.linalg.norm(x[:, j + 1:], axis=1)
        ang[:, j] = np.arctan2(tail, x[:, j])
    ang[:, -1] = np.mod(np.arctan2(x[:, n - 1], x[:, n - 2]), 2 * math.pi)
    return ang


def _jacobian(angles: np.ndarray) -> np.ndarray:
    m, k = angles.shape
    n = k + 1
    jac = np.ones(m)
    for j in range(k - 1):
        jac *= np.sin(angles[:, j]) ** (n - 2 - j)
    return jac


def _max_sin(lo, hi):
    # max of sin over [lo, hi] within [0, pi]
    inside = (lo <= math.pi / 2) & (hi >= math.pi / 2)
    return np.where(inside, 1.0, np.maximum(np.sin(lo), np.sin(hi)))


def _partition_boxes(n: int, diameter: float) -> np.ndarray:
    """Boxes in hyperspherical angle space whose cells have geodesic diameter <= ``diameter``.

    A cell [theta in band] x (sub-cell of S^{n-2}) has diameter at most
    band height + sin(theta_max) * sub-cell diameter, so both terms get half
    the budget.  Returns an array (cells, n-1, 2).
    """
    if n == 2:
        k = max(1, math.ceil(2 * math.pi / diameter)) if diameter < math.pi else 1
        edges = np.linspace(0.0, 2 * math.pi, k + 1)
        return np.stack([edges[:-1], edges[1:]], axis=1)[:, None, :]
    half = diameter / 2.0
    bands = max(1, math.ceil(math.pi / half))
    edges = np.linspace(0.0, math.pi, bands + 1)
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        smax = float(_max_sin(np.array(lo), np.array(hi)))
        sub_diam = half / smax if smax > 0 else np.inf
        sub = _partition_boxes(n - 1, min(sub_diam, 4 * math.pi))
        band = np.broadcast_to(np.array([lo, hi]), (sub.shape[0], 1, 2))
        out.append(np.concatenate([band, sub], axis=1))
    return np.concatenate(out, axis=0)


def partition_sphere(n: int, m: int) -> np.ndarray:
    """Partition of S^{n-1} into angle boxes of Euclidean diameter < 1/m."""
    if m < 1:
        raise ValueError("resolution m must be at least 1")
    # arc length bounds chord length; 5% margin keeps the inequality strict
    return _partition_boxes(n, 0.95 / m)


def _cell_masses(density: Density, boxes: np.ndarray, order: int) -> np.ndarray:
    nodes, wts = np.polynomial.legendre.leggauss(order)
    k = boxes.shape[1]
    grids = np.meshgrid(*([np.arange(order)] * k), indexing="ij")
    combo = np.stack([g.ravel() for g in grids], axis=1)  # (order^k, k)
    lo = boxes[:, :, 0]
    hi = boxes[:, :, 1]
    half = (hi - lo) / 2.0
    mid = (hi + lo) / 2.0
    t = nodes[combo]  # (Q, k)
    w = np.prod(wts[combo], axis=1)  # (Q,)
    masses = np.zeros(boxes.shape[0])
    chunk = max(1, 200_000 // len(w))
    for s in range(0, boxes.shape[0], chunk):
        sl = slice(s, s + chunk)
        ang = mid[sl, None, :] + half[sl, None, :] * t[None, :, :]
        flat = ang.reshape(-1, k)
        vals = density(angles_to_points(flat)) * _jacobian(flat)
        vals = vals.reshape(ang.shape[0], -1)
        masses[sl] = (vals * w).sum(axis=1) * np.prod(half[sl], axis=1)
    return masses


def _jitter_in_cells(rng, boxes: np.ndarray) -> np.ndarray:
    """One area-uniform point per cell, by rejection on the angle Jacobian."""
    n_cells, k = boxes.shape[0], boxes.shape[1]
    n = k + 1
    jmax = np.ones(n_cells)
    for j in range(k - 1):
        jmax *= _max_sin(boxes[:, j, 0], boxes[:, j, 1]) ** (n - 2 - j)
    out = np.empty((n_cells, k))
    todo = np.arange(n_cells)
    for _ in range(10_000):
        if todo.size == 0:
            break
        lo = boxes[todo, :, 0]
        hi = boxes[todo, :, 1]
        ang = lo + (hi - lo) * rng.random(lo.shape)
        accept = rng.random(todo.size) * jmax[todo] <= _jacobian(ang)
        out[todo[accept]] = ang[accept]
        todo = todo[~accept]
    if todo.size:
        raise RuntimeError("cell jitter rejection sampler did not terminate")
    return angles_to_points(out)


def _cell_index(boxes: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the partition cell containing each point (brute force over boxes)."""
    ang = points_to_angles(points)
    idx = np.full(points.shape[0], -1)
    chunk = max(1, 2_000_000 // boxes.shape[0])
    for s in range(0, points.shape[0], chunk):
        a = ang[s:s + chunk, None, :]
        inside = np.all((a >= boxes[None, :, :, 0]) & (a <= boxes[None, :, :, 1]), axis=2)
        idx[s:s + chunk] = np.argmax(inside, axis=1)
    return idx


@dataclass(frozen=True)
class Discretization:
    measure: DiscreteMeasure
    resolution: int
    boxes: np.ndarray = field(repr=False)
    cell_masses: np.ndarray = field(repr=False)
    retries: int = 0

    @property
    def cell_count(self) -> int:
        return self.boxes.shape[0]


def sandwich_threshold(n: int) -> int:
    """Smallest resolution m for which the all-ones Wulff shape over the
    discretized directions is guaranteed to lie between B and 2B.

    If every cell has diameter < 1/m, each unit u sits within chord distance
    1/m of some representative v, so u.v > 1 - 1/(2 m^2) >= 1/2 for m >= 1,
    and the radial function of the all-ones shape is below 2.
    """
    return 1


def discretize(density, m: int, seed: int = 0, max_retries: int = 100,
               quadrature_order: Optional[int] = None, sampler_size: int = 10**6,
               return_details: bool = False):
    """Discretize a spherical measure at resolution ``m``.

    ``density`` is either a :class:`Density` (cell masses by tensor
    Gauss-Legendre quadrature in angle space) or an object exposing
    ``dim``, ``mass`` and ``sample(rng, size)`` (cell masses by binning
    samples).  Each cell gets a jittered representative; its weight is the
    cell mass plus 1/N^2, and the weights are rescaled to the input's total
    mass.
    """
    n = density.dim
    boxes = partition_sphere(n, m)
    n_cells = boxes.shape[0]
    rng = np.random.default_rng(seed)
    if hasattr(density, "sample") and not isinstance(density, Density):
        pts = density.sample(rng, sampler_size)
        counts = np.bincount(_cell_index(boxes, pts), minlength=n_cells)
        masses = counts / counts.sum() * density.mass
    else:
        order = quadrature_order or (6 if n <= 3 else 3)
        masses = _cell_masses(density, boxes, order)
    weights = masses + 1.0 / n_cells**2
    weights = weights * (density.mass / math.fsum(weights))
    for attempt in range(max_retries + 1):
        reps = _jitter_in_cells(rng, boxes)
        reps /= np.linalg.norm(reps, axis=1, keepdims=True)
        total = _subset_count(n_cells, n)
        ok = general_position_check(reps, n, spot_check=total > MAX_SUBSETS, seed=seed + attempt)
        if ok:
            mu = DiscreteMeasure(reps, weights)
            if return_details:
                return Discretization(mu, m, boxes, masses, attempt)
            return mu
        logger.debug("representatives not in general position; redrawing (attempt %d)", attempt)
    raise RuntimeError(f"could not draw general-position representatives in {max_retries} retries")
