"""LP solve entry point with interchangeable backends."""

from __future__ import annotations

import numpy as np

from .model import LinearProgram, PwlModel
from .result import (ERROR, INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED,
                     LpSolution, SolverError)
from .simplex import simplex

DEFAULT_TOL = 1e-7
METHODS = ("highs", "simplex")


def _solve_highs(lp: LinearProgram, tol: float, max_iter) -> LpSolution:
    import highspy

    inf = highspy.kHighsInf
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("threads", 1)
    h.setOptionValue("random_seed", 0)
    h.setOptionValue("primal_feasibility_tolerance", tol)
    h.setOptionValue("dual_feasibility_tolerance", tol)
    if max_iter is not None:
        h.setOptionValue("simplex_iteration_limit", int(max_iter))

    A = lp.A.tocsc()
    model = highspy.HighsLp()
    model.num_col_ = lp.n_vars
    model.num_row_ = lp.n_rows
    model.offset_ = float(lp.offset)
    model.col_cost_ = lp.c
    model.col_lower_ = np.where(np.isinf(lp.lb), -inf, lp.lb)
    model.col_upper_ = np.where(np.isinf(lp.ub), inf, lp.ub)
    model.row_lower_ = np.where(lp.is_eq, lp.rhs, -inf)
    model.row_upper_ = lp.rhs
    model.a_matrix_.format_ = highspy.MatrixFormat.kColwise
    model.a_matrix_.start_ = A.indptr
    model.a_matrix_.index_ = A.indices
    model.a_matrix_.value_ = A.data
    h.passModel(model)
    h.run()
    status = h.getModelStatus()
    iters = int(h.getInfo().simplex_iteration_count)
    S = highspy.HighsModelStatus
    if status == S.kUnboundedOrInfeasible:
        # presolve cannot tell the two apart; rerun without it
        h.setOptionValue("presolve", "off")
        h.run()
        status = h.getModelStatus()
    if status == S.kOptimal:
        x = np.array(h.getSolution().col_value)
        return LpSolution(OPTIMAL, lp.objective(x), x, iters, "optimal")
    if status == S.kInfeasible:
        return LpSolution(INFEASIBLE, np.nan, None, iters, "infeasible")
    if status == S.kUnbounded:
        return LpSolution(UNBOUNDED, -np.inf, None, iters, "unbounded")
    if status == S.kIterationLimit:
        return LpSolution(ITERATION_LIMIT, np.nan, None, iters, "iteration limit")
    return LpSolution(ERROR, np.nan, None, iters, h.modelStatusToString(status))


def solve_lp(lp: LinearProgram, method: str = "highs", tol: float = DEFAULT_TOL,
             max_iter=None, **options) -> LpSolution:
    """Solve ``lp`` and verify the returned point.

    An optimal status is downgraded to ``"error"`` when the primal point
    violates the rows or bounds by more than ``tol`` (scaled by the largest
    right-hand side), so a reported optimum is always feasible.
    """
    if method == "highs":
        sol = _solve_highs(lp, tol, max_iter)
    elif method == "simplex":
        sol = simplex(lp, max_iter=max_iter, **options)
    else:
        raise ValueError(f"unknown LP method {method!r}; choose from {METHODS}")
    if sol.status == OPTIMAL:
        sol.max_violation = lp.max_violation(sol.x)
        scale = max(1.0, np.abs(lp.rhs).max(initial=0.0))
        if sol.max_violation > tol * scale * 10:
            sol.status = ERROR
            sol.message = f"returned point violates constraints by {sol.max_violation:.3g}"
    return sol


def solve_model(model: PwlModel, method: str = "highs", tol: float = DEFAULT_TOL,
                context: str = "", **options):
    """Lower and solve ``model``; return ``(x_model, objective, solution)``.

    Raises :class:`SolverError` unless the LP is solved to optimality.
    """
    lp = model.lower()
    sol = solve_lp(lp, method=method, tol=tol, **options)
    if sol.status != OPTIMAL:
        raise SolverError(sol, context)
    return sol.x[: lp.n_model_vars], sol.objective, sol
