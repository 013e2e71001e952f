"""Dense two-phase tableau simplex for small and medium LPs.

Variables are shifted/split into nonnegative form, ``<=`` rows get slacks,
and phase 1 drives artificial variables to zero. Entering columns follow
Dantzig's rule and fall back to Bland's rule after a run of degenerate
pivots, which guarantees termination; ``pivot_rule="bland"`` forces Bland
from the first pivot.

Infeasible and unbounded outcomes are reported only with a verified
certificate: a Farkas vector for infeasibility, a recession ray (in the
original variable space) for unboundedness.
"""

from __future__ import annotations

import numpy as np

from .model import LinearProgram
from .result import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, LpSolution

DEGENERATE_RUN = 50


class _Standardized:
    """Maps ``x`` of the LP to ``z >= 0`` with ``A_s z = b_s``."""

    def __init__(self, lp: LinearProgram):
        n = lp.n_vars
        lb, ub = lp.lb, lp.ub
        shift = np.zeros(n)
        cols = []  # (orig var, sign) for each nonnegative column
        bound_rows = []  # (column index, upper limit)
        for j in range(n):
            if np.isfinite(lb[j]):
                shift[j] = lb[j]
                cols.append((j, 1.0))
                if np.isfinite(ub[j]):
                    bound_rows.append((len(cols) - 1, ub[j] - lb[j]))
            elif np.isfinite(ub[j]):
                shift[j] = ub[j]
                cols.append((j, -1.0))
            else:
                cols.append((j, 1.0))
                cols.append((j, -1.0))
        n_p = len(cols)
        T = np.zeros((n, n_p))
        for k, (j, s) in enumerate(cols):
            T[j, k] = s
        A = lp.A.toarray() if lp.n_rows else np.zeros((0, n))
        A_p = A @ T
        b_p = lp.rhs - A @ shift
        is_eq = lp.is_eq.copy()
        if bound_rows:
            B = np.zeros((len(bound_rows), n_p))
            for i, (k, limit) in enumerate(bound_rows):
                B[i, k] = 1.0
            A_p = np.vstack([A_p, B])
            b_p = np.concatenate([b_p, [lim for _, lim in bound_rows]])
            is_eq = np.concatenate([is_eq, np.zeros(len(bound_rows), bool)])

        m = A_p.shape[0]
        slack_rows = np.flatnonzero(~is_eq)
        S = np.zeros((m, len(slack_rows)))
        S[slack_rows, np.arange(len(slack_rows))] = 1.0
        A_s = np.hstack([A_p, S])
        b_s = b_p.copy()
        sign = np.where(b_s < 0, -1.0, 1.0)
        A_s *= sign[:, None]
        b_s *= sign

        self.T = T
        self.shift = shift
        self.n_p = n_p
        self.A_s = A_s
        self.b_s = b_s
        self.c_s = np.concatenate([T.T @ lp.c, np.zeros(len(slack_rows))])
        # a slack column whose entry stayed +1 is a ready basic column
        self.ready = {}
        for k, i in enumerate(slack_rows):
            if sign[i] > 0:
                self.ready[i] = n_p + k

    def to_x(self, z: np.ndarray) -> np.ndarray:
        return self.shift + self.T @ z[: self.n_p]

    def ray_to_x(self, d: np.ndarray) -> np.ndarray:
        return self.T @ d[: self.n_p]


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    factor = tab[:, col].copy()
    factor[row] = 0.0
    tab -= np.outer(factor, tab[row])


def _run(tab, basis, n_cols, tol, max_iter, bland, counter):
    """Iterate on ``tab`` (last row = reduced costs) until optimal or unbounded."""
    m = tab.shape[0] - 1
    degenerate = 0
    while True:
        if counter[0] >= max_iter:
            return ITERATION_LIMIT, None
        rc = tab[-1, :n_cols]
        candidates = np.flatnonzero(rc < -tol)
        if candidates.size == 0:
            return OPTIMAL, None
        use_bland = bland or degenerate >= DEGENERATE_RUN
        col = int(candidates[0] if use_bland else candidates[np.argmin(rc[candidates])])
        column = tab[:m, col]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return UNBOUNDED, col
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        degenerate = degenerate + 1 if best <= tol else 0
        _pivot(tab, row, col)
        basis[row] = col
        counter[0] += 1


def simplex(lp: LinearProgram, tol: float = 1e-9, max_iter: int | None = None,
            pivot_rule: str = "dantzig") -> LpSolution:
    """Solve ``lp`` with the two-phase tableau method."""
    if pivot_rule not in ("dantzig", "bland"):
        raise ValueError("pivot_rule must be 'dantzig' or 'bland'")
    bland = pivot_rule == "bland"
    std = _Standardized(lp)
    A, b, c = std.A_s, std.b_s, std.c_s
    m, N = A.shape
    if max_iter is None:
        max_iter = 50 * (m + N) + 1000
    counter = [0]

    art_rows = [i for i in range(m) if i not in std.ready]
    n_art = len(art_rows)
    tab = np.zeros((m + 1, N + n_art + 1))
    tab[:m, :N] = A
    tab[:m, -1] = b
    basis = np.empty(m, dtype=int)
    init_col = np.empty(m, dtype=int)
    for i, col in std.ready.items():
        basis[i] = col
        init_col[i] = col
    for k, i in enumerate(art_rows):
        tab[i, N + k] = 1.0
        basis[i] = N + k
        init_col[i] = N + k

    # phase 1: minimize the sum of artificials
    cost1 = np.zeros(N + n_art)
    cost1[N:] = 1.0
    tab[-1, :-1] = cost1
    tab[-1] -= tab[art_rows].sum(axis=0) if n_art else 0.0
    status, _ = _run(tab, basis, N + n_art, tol, max_iter, bland, counter)
    if status == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, np.nan, None, counter[0], "iteration limit in phase 1")
    infeas = -tab[-1, -1]
    if infeas > 1e-7 * max(1.0, np.abs(b).max(initial=0.0)):
        y = cost1[init_col] - tab[-1, init_col]
        cert_ok = y @ b > 0 and np.all(y @ A <= 1e-7 * max(1.0, np.abs(y).max()))
        if not cert_ok:
            return LpSolution("error", np.nan, None, counter[0], "phase 1 certificate check failed")
        return LpSolution(INFEASIBLE, np.nan, None, counter[0], "infeasible", certificate=y)

    # drive remaining artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= N:
            nz = np.flatnonzero(np.abs(tab[i, :N]) > tol)
            if nz.size:
                _pivot(tab, i, int(nz[0]))
                basis[i] = int(nz[0])
            else:
                keep[i] = False
    tab = np.vstack([tab[:m][keep][:, list(range(N)) + [-1]], np.zeros((1, N + 1))])
    basis = basis[keep]
    m2 = len(basis)

    # phase 2
    tab[-1, :N] = c
    tab[-1, -1] = 0.0
    cb = c[basis]
    tab[-1] -= cb @ tab[:m2] if m2 else 0.0
    status, col = _run(tab, basis, N, tol, max_iter, bland, counter)
    if status == ITERATION_LIMIT:
        return LpSolution(ITERATION_LIMIT, np.nan, None, counter[0], "iteration limit in phase 2")
    if status == UNBOUNDED:
        d = np.zeros(N)
        d[col] = 1.0
        d[basis] = -tab[:m2, col]
        ray = std.ray_to_x(d)
        return LpSolution(UNBOUNDED, -np.inf, None, counter[0], "unbounded", certificate=ray)

    z = np.zeros(N)
    z[basis] = tab[:m2, -1]
    x = std.to_x(z)
    return LpSolution(OPTIMAL, lp.objective(x), x, counter[0], "optimal")
