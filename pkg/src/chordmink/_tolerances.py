"""Numerical tolerances shared across the package.

Geometric tolerances are absolute at unit scale; polytope code multiplies
them by ``max(1, |z|_inf)`` so that rescaled problems behave the same.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    unit_norm: float = 1e-12
    duplicate_direction: float = 1e-12
    hemisphere_feasibility: float = 1e-9
    general_position_det: float = 1e-10
    subspace_membership: float = 1e-9
    strict_inequality_slack: float = 1e-12
    vertex_det: float = 1e-10
    vertex_merge: float = 1e-9
    vertex_feasibility: float = 1e-9
    facet_incidence: float = 1e-9
    interior_slack: float = 1e-9
    radial_interior: float = 1e-12
    radial_direction: float = 1e-14
    minkowski_relation: float = 1e-7


DEFAULT = Tolerances()

# enumeration budgets
MAX_SUBSETS = 10**6
SPOT_CHECK_SUBSETS = 10**5
# brute-force vertex enumeration budget in C(N, n) hyperplane subsets (about
# N = 100 for n = 2 and N = 32 for n = 3); larger inputs go through qhull
MAX_VERTEX_SUBSETS = 5000
