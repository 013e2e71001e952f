"""Solver outcome container."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
ERROR = "error"


@dataclass
class LpSolution:
    """Status, objective and primal point of an LP solve.

    ``x`` is ``None`` unless the status is optimal. ``certificate`` holds a
    Farkas vector (infeasible) or a recession ray in the LP's variable space
    (unbounded) when the backend provides one.
    """

    status: str
    objective: float
    x: Optional[np.ndarray]
    iterations: int = 0
    message: str = ""
    certificate: Optional[np.ndarray] = None
    max_violation: float = np.nan

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


class SolverError(RuntimeError):
    """An LP did not reach an optimal solution."""

    def __init__(self, solution: LpSolution, context: str = ""):
        self.solution = solution
        self.status = solution.status
        msg = f"LP {solution.status}"
        if context:
            msg = f"{context}: {msg}"
        if solution.message and solution.message != solution.status:
            msg += f" ({solution.message})"
        super().__init__(msg)
