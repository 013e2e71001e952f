"""Piecewise-linear convex model builder and its lowering to a plain LP.

A :class:`PwlModel` holds bounded variables, linear rows, and an objective
made of a linear part plus nonnegatively weighted ``|affine|`` and
``max(affine, ...)`` terms. :meth:`PwlModel.lower` replaces every such term
with an epigraph variable, which is exact at any optimum because the new
variables carry strictly positive cost and are only bounded from below.

Rows and terms are added in vectorized batches: ``cols``/``vals`` are
``(n_rows, width)`` arrays, one row per leading index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

LE = "<="
GE = ">="
EQ = "=="
_SENSES = (LE, GE, EQ)


def _as_rows(cols, vals):
    cols = np.asarray(cols, dtype=np.int64)
    if cols.ndim == 1:
        cols = cols[:, None]
    if vals is None:
        vals = np.ones(cols.shape)
    else:
        vals = np.broadcast_to(np.asarray(vals, dtype=float), cols.shape)
    return cols, np.array(vals, dtype=float)


@dataclass
class LinearProgram:
    """``min c @ x + offset`` s.t. ``A @ x (<= | ==) rhs`` and ``lb <= x <= ub``.

    ``A`` is stored as CSR; ``is_eq[i]`` marks equality rows, the rest are
    ``<=``. ``n_model_vars`` counts the leading columns owned by the source
    model; epigraph variables follow them.
    """

    c: np.ndarray
    A: sp.csr_matrix
    rhs: np.ndarray
    is_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    offset: float = 0.0
    n_model_vars: Optional[int] = None
    names: Optional[list] = None

    def __post_init__(self):
        n = len(self.c)
        m = len(self.rhs)
        if self.A.shape != (m, n):
            raise ValueError(f"A has shape {self.A.shape}, expected {(m, n)}")
        if len(self.is_eq) != m or len(self.lb) != n or len(self.ub) != n:
            raise ValueError("inconsistent LP dimensions")
        if self.n_model_vars is None:
            self.n_model_vars = n

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @classmethod
    def from_dense(cls, c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=(0, None)):
        """Build from ``linprog``-style dense arguments."""
        c = np.asarray(c, dtype=float)
        n = len(c)
        blocks, rhs, eq = [], [], []
        if A_ub is not None and len(A_ub):
            blocks.append(np.atleast_2d(np.asarray(A_ub, float)))
            rhs.append(np.asarray(b_ub, float))
            eq.append(np.zeros(len(b_ub), bool))
        if A_eq is not None and len(A_eq):
            blocks.append(np.atleast_2d(np.asarray(A_eq, float)))
            rhs.append(np.asarray(b_eq, float))
            eq.append(np.ones(len(b_eq), bool))
        A = sp.csr_matrix(np.vstack(blocks)) if blocks else sp.csr_matrix((0, n))
        rhs = np.concatenate(rhs) if rhs else np.zeros(0)
        is_eq = np.concatenate(eq) if eq else np.zeros(0, bool)
        bounds = np.array(
            [bounds] * n if np.ndim(bounds) == 1 else bounds, dtype=object
        ).reshape(n, 2)
        lb = np.array([-np.inf if b is None else float(b) for b in bounds[:, 0]])
        ub = np.array([np.inf if b is None else float(b) for b in bounds[:, 1]])
        return cls(c, A, rhs, is_eq, lb, ub)

    def objective(self, x) -> float:
        return float(self.c @ x + self.offset)

    def max_violation(self, x) -> float:
        """Largest bound or row violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        viol = [0.0]
        viol.append(np.max(self.lb - x, initial=0.0))
        viol.append(np.max(x - self.ub, initial=0.0))
        if self.n_rows:
            r = self.A @ x - self.rhs
            viol.append(np.max(np.abs(r[self.is_eq]), initial=0.0))
            viol.append(np.max(r[~self.is_eq], initial=0.0))
        return float(max(viol))

    def to_lp_format(self) -> str:
        """Render in CPLEX LP text format, one row per line.

        The constant offset is not expressible in every reader, so it is
        written as a leading comment.
        """
        names = self.names or [f"x{j}" for j in range(self.n_vars)]
        names = [_safe_name(nm, j) for j, nm in enumerate(names)]

        def terms(cols, vals):
            parts = []
            for j, v in zip(cols, vals):
                if v == 0:
                    continue
                sign = "-" if v < 0 else "+"
                parts.append(f"{sign} {abs(float(v))!r} {names[j]}")
            if not parts:
                parts = ["0 " + names[0]]
            elif parts[0].startswith("+ "):
                parts[0] = parts[0][2:]
            return parts

        def expr(cols, vals):
            return " ".join(terms(cols, vals))

        lines = [
            f"\\ offset = {float(self.offset)!r}",
            f"\\ vars = {self.n_vars}, rows = {self.n_rows}",
            "Minimize",
        ]
        nz = np.flatnonzero(self.c)
        obj = terms(nz, self.c[nz])
        # the objective may be long: wrap it over continuation lines
        for k in range(0, len(obj), 6):
            chunk = " ".join(obj[k:k + 6])
            lines.append((" obj: " if k == 0 else "   ") + chunk)
        lines.append("Subject To")
        A = self.A.tocsr()
        for i in range(self.n_rows):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            op = "=" if self.is_eq[i] else "<="
            lines.append(f" r{i}: {expr(A.indices[lo:hi], A.data[lo:hi])} {op} {float(self.rhs[i])!r}")
        lines.append("Bounds")
        for j in range(self.n_vars):
            lo, hi = self.lb[j], self.ub[j]
            if np.isinf(lo) and np.isinf(hi):
                lines.append(f" {names[j]} free")
            elif lo == hi:
                lines.append(f" {names[j]} = {float(lo)!r}")
            else:
                left = "-inf" if np.isinf(lo) else repr(float(lo))
                right = "+inf" if np.isinf(hi) else repr(float(hi))
                lines.append(f" {left} <= {names[j]} <= {right}")
        lines.append("End")
        return "\n".join(lines) + "\n"


def _safe_name(name: str, j: int) -> str:
    cleaned = "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in str(name))
    return f"{cleaned}_{j}" if cleaned else f"x{j}"


@dataclass
class _TermBlock:
    coef: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    const: np.ndarray
    constants: tuple = ()


@dataclass
class PwlModel:
    """Builder for ``min linear + sum c_i |a_i| + sum d_j max(A_j)`` under linear rows."""

    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    names: list = field(default_factory=list)

    def __post_init__(self):
        self._obj = {}
        self._obj_const = 0.0
        self._rows = []  # (cols, vals, sense, rhs)
        self._abs = []
        self._max = []

    @property
    def n_vars(self) -> int:
        return len(self.lb)

    def add_variables(self, n: int, lb=-np.inf, ub=np.inf, name: str = "v") -> np.ndarray:
        """Append ``n`` variables and return their column indices."""
        start = self.n_vars
        self.lb.extend(np.broadcast_to(np.asarray(lb, float), (n,)).tolist())
        self.ub.extend(np.broadcast_to(np.asarray(ub, float), (n,)).tolist())
        self.names.extend(f"{name}[{i}]" for i in range(n))
        return np.arange(start, start + n)

    def set_bounds(self, idx, lb=None, ub=None) -> None:
        for j in np.atleast_1d(idx):
            if lb is not None:
                self.lb[j] = float(lb)
            if ub is not None:
                self.ub[j] = float(ub)

    def add_constraints(self, cols, vals, sense: str, rhs) -> None:
        """Add one row per leading index: ``sum vals[i] * x[cols[i]] sense rhs[i]``."""
        if sense not in _SENSES:
            raise ValueError(f"sense must be one of {_SENSES}")
        cols, vals = _as_rows(cols, vals)
        rhs = np.broadcast_to(np.asarray(rhs, float), (cols.shape[0],)).copy()
        self._rows.append((cols, vals, sense, rhs))

    def add_objective(self, cols, coef) -> None:
        """Add linear objective coefficients (accumulated per variable)."""
        cols = np.atleast_1d(cols)
        coef = np.broadcast_to(np.asarray(coef, float), cols.shape)
        for j, c in zip(cols.tolist(), coef.tolist()):
            self._obj[j] = self._obj.get(j, 0.0) + c

    def add_constant(self, value: float) -> None:
        self._obj_const += float(value)

    def add_abs_terms(self, coef, cols, vals=None, const=0.0) -> None:
        """Add ``coef[i] * |vals[i] @ x[cols[i]] + const[i]|`` for every row ``i``."""
        cols, vals = _as_rows(cols, vals)
        n = cols.shape[0]
        coef = np.broadcast_to(np.asarray(coef, float), (n,)).copy()
        if np.any(coef < 0):
            raise ValueError("absolute-value weights must be nonnegative")
        const = np.broadcast_to(np.asarray(const, float), (n,)).copy()
        self._abs.append(_TermBlock(coef, cols, vals, const))

    def add_max_term(self, coef: float, cols=None, vals=None, const=0.0, constants=()) -> None:
        """Add ``coef * max(affine rows..., *constants)``.

        ``cols``/``vals``/``const`` describe the affine pieces, one per row;
        ``constants`` are extra constant pieces.
        """
        if coef < 0:
            raise ValueError("max-term weight must be nonnegative")
        if cols is None:
            cols, vals = np.zeros((0, 1), np.int64), np.zeros((0, 1))
        cols, vals = _as_rows(cols, vals)
        const = np.broadcast_to(np.asarray(const, float), (cols.shape[0],)).copy()
        constants = tuple(float(c) for c in constants)
        if cols.shape[0] == 0 and not constants:
            raise ValueError("max over an empty set")
        self._max.append(_TermBlock(np.array([coef], float), cols, vals, const, constants))

    def evaluate(self, x) -> float:
        """Piecewise objective at a point in model-variable space."""
        x = np.asarray(x, dtype=float)
        total = self._obj_const
        for j, c in self._obj.items():
            total += c * x[j]
        for blk in self._abs:
            total += float(blk.coef @ np.abs((blk.vals * x[blk.cols]).sum(axis=1) + blk.const))
        for blk in self._max:
            pieces = list((blk.vals * x[blk.cols]).sum(axis=1) + blk.const)
            total += float(blk.coef[0]) * max(pieces + list(blk.constants))
        return float(total)

    def lower(self) -> LinearProgram:
        """Epigraph reformulation into a :class:`LinearProgram`."""
        n0 = self.n_vars
        lb = list(self.lb)
        ub = list(self.ub)
        names = list(self.names)
        c_extra = []
        row_cols, row_vals, row_ids, rhs, is_eq = [], [], [], [], []
        n_rows = 0

        def push(cols, vals, r, eq):
            nonlocal n_rows
            k = cols.shape[0]
            ids = np.repeat(np.arange(n_rows, n_rows + k), cols.shape[1])
            row_ids.append(ids)
            row_cols.append(cols.ravel())
            row_vals.append(vals.ravel())
            rhs.append(r)
            is_eq.append(np.full(k, eq))
            n_rows += k

        for cols, vals, sense, r in self._rows:
            if sense == GE:
                push(cols, -vals, -r, False)
            else:
                push(cols, vals, r, sense == EQ)

        n_next = n0
        for blk in self._abs:
            k = blk.cols.shape[0]
            s = np.arange(n_next, n_next + k)
            n_next += k
            lb.extend([0.0] * k)
            ub.extend([np.inf] * k)
            names.extend(f"abs[{j}]" for j in s)
            c_extra.append(blk.coef)
            # a - s <= -const  and  -a - s <= const
            cols = np.hstack([blk.cols, s[:, None]])
            push(cols, np.hstack([blk.vals, -np.ones((k, 1))]), -blk.const, False)
            push(cols, np.hstack([-blk.vals, -np.ones((k, 1))]), blk.const, False)

        for blk in self._max:
            m = n_next
            n_next += 1
            lb.append(max(blk.constants) if blk.constants else -np.inf)
            ub.append(np.inf)
            names.append(f"max[{m}]")
            c_extra.append(blk.coef)
            k = blk.cols.shape[0]
            if k:
                cols = np.hstack([blk.cols, np.full((k, 1), m)])
                push(cols, np.hstack([blk.vals, -np.ones((k, 1))]), -blk.const, False)

        n = n_next
        c = np.zeros(n)
        for j, v in self._obj.items():
            c[j] += v
        if c_extra:
            c[n0:] = np.concatenate(c_extra)
        if row_ids:
            A = sp.csr_matrix(
                (np.concatenate(row_vals), (np.concatenate(row_ids), np.concatenate(row_cols))),
                shape=(n_rows, n),
            )
            rhs_arr = np.concatenate(rhs)
            eq_arr = np.concatenate(is_eq)
        else:
            A = sp.csr_matrix((0, n))
            rhs_arr = np.zeros(0)
            eq_arr = np.zeros(0, bool)
        return LinearProgram(
            c=c,
            A=A,
            rhs=rhs_arr,
            is_eq=eq_arr,
            lb=np.array(lb, float),
            ub=np.array(ub, float),
            offset=self._obj_const,
            n_model_vars=n0,
            names=names,
        )


def lower(model: PwlModel) -> LinearProgram:
    return model.lower()
