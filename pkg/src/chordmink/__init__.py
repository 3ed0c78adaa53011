"""Numerical toolkit for the discrete L_p chord Minkowski problem.

Given a discrete measure mu on the unit sphere, ``solve`` finds a polytope
whose L_p chord measure F_{p,q}(P, .) matches mu.  The supporting modules
compute chord integrals and chord measures (``chord``), build polytopes from
halfspaces (``polytope``), check admissibility of measures (``measure``) and
verify results (``verify``).
"""
__version__ = "0.1.0"

from .chord import (chord_integral, chord_integral_lines, chord_integral_quadrature, chord_measure,
                    cone_chord_measure, dual_volume, lp_chord_measure)
from .errors import (AdmissibilityError, BudgetExceededError, ChordMinkError, ConvergenceError,
                     DegenerateShapeError, InvalidMeasureError, NotInteriorError)
from .measure import (DiscreteMeasure, UniformDensity, VonMisesFisherDensity, discretize,
                      general_position_check, hemisphere_check, subspace_mass_check)
from .polytope import HalfspaceSpec, Polytope, polytope_from_offsets, wulff_shape
from .solver import SolutionReport, SolverConfig, solve, solve_continuous
from .verify import invariant_suite, residual, variational_check

__all__ = [
    "AdmissibilityError", "BudgetExceededError", "ChordMinkError", "ConvergenceError",
    "DegenerateShapeError", "DiscreteMeasure", "HalfspaceSpec", "InvalidMeasureError",
    "NotInteriorError", "Polytope", "SolutionReport", "SolverConfig", "UniformDensity",
    "VonMisesFisherDensity", "chord_integral", "chord_integral_lines", "chord_integral_quadrature",
    "chord_measure", "cone_chord_measure", "discretize", "dual_volume", "general_position_check",
    "hemisphere_check", "invariant_suite", "lp_chord_measure", "polytope_from_offsets", "residual",
    "solve", "solve_continuous", "subspace_mass_check", "variational_check", "wulff_shape",
]
