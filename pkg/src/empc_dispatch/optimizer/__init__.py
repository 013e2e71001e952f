"""Piecewise-linear model building, LP lowering and LP solving."""

from .model import EQ, GE, LE, LinearProgram, PwlModel, lower
from .result import (ERROR, INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
                     LpSolution, SolverError)
from .simplex import simplex
from .solve import DEFAULT_TOL, METHODS, solve_lp, solve_model

__all__ = [
    "EQ", "GE", "LE", "LinearProgram", "PwlModel", "lower", "LpSolution",
    "SolverError", "OPTIMAL", "INFEASIBLE", "UNBOUNDED", "ITERATION_LIMIT",
    "ERROR", "simplex", "solve_lp", "solve_model", "DEFAULT_TOL", "METHODS",
]
