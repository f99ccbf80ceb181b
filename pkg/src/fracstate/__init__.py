"""Finite-element toolkit for the integral fractional Laplacian on an interval.

Dirichlet problems with density, dual-space and measure data, level-set
diagnostics, and a state-constrained optimal control solver.
"""
from .mesh import Grid, GridFunction, build_grid, lp_norm, mass_matrix
from .spaces import DualElement, FracParams, cns_constant, gagliardo_seminorm, kappa
from .operator import (LoadVector, RadonMeasure, StiffnessMatrix, assemble_stiffness,
                       load_density, load_dual, load_lumped, load_measure)
from .solve_state import StateSolution, boundary_decay, solve_state, sup_norm_ratio
from .solve_measure import VeryWeakSolution, measure_stability, solve_measure
from .bounds import (IterationLemmaInput, LevelSetProfile, degiorgi_threshold, degiorgi_verify,
                     level_profile, linfty_bound_estimate)
from .control import (ControlProblem, KktReport, adjoint_solve, check_slater,
                      projection_residual, solve_control)

__version__ = "0.1.0"
