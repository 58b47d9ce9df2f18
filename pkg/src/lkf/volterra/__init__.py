"""Measure-driven Volterra equations for generalized scale functions."""
from .atomic import recursive_atomic_w, recursive_atomic_z
from .grid import GridSpec, check_atoms_on_grid, make_grid
from .picard import PicardReport, picard_solve
from .structural import alternative_form_residual, integrate_on_nodes, measure_comparison_residual
from .sweep import (
    Discretization,
    ScaleFamily,
    solve_generic,
    solve_u,
    solve_w,
    solve_w_family,
    solve_w_rows,
    solve_z,
)
from .tables import ScaleTable, SolveConfig

__all__ = [
    "Discretization",
    "GridSpec",
    "PicardReport",
    "ScaleFamily",
    "ScaleTable",
    "SolveConfig",
    "alternative_form_residual",
    "check_atoms_on_grid",
    "integrate_on_nodes",
    "make_grid",
    "measure_comparison_residual",
    "picard_solve",
    "recursive_atomic_w",
    "recursive_atomic_z",
    "solve_generic",
    "solve_u",
    "solve_w",
    "solve_w_family",
    "solve_w_rows",
    "solve_z",
]
