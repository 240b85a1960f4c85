"""Dense two-phase simplex with Bland's rule, for the small LPs of the layout search."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class LpError(RuntimeError):
    pass


@dataclass
class LpResult:
    x: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible" | "unbounded"
    iterations: int


def _pivot(T: np.ndarray, row: int, col: int):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0:
            T[r] -= T[r, col] * T[row]


def _run(T: np.ndarray, basis: list[int], n_allowed: int, tol: float, max_iter: int) -> tuple[str, int]:
    """Minimise the objective in the last row of ``T`` (stored as reduced costs)."""
    it = 0
    while True:
        if it >= max_iter:
            raise LpError("simplex iteration limit reached")
        obj = T[-1, :n_allowed]
        entering = next((j for j in range(n_allowed) if obj[j] < -tol), None)
        if entering is None:
            return "optimal", it
        col = T[:-1, entering]
        ratios = [(T[r, -1] / col[r], basis[r], r) for r in range(len(col)) if col[r] > tol]
        if not ratios:
            return "unbounded", it
        best = min(q for q, _, _ in ratios)
        # Bland: among ties, the row whose basic variable has the smallest index leaves
        leave = min((b, r) for q, b, r in ratios if q <= best + tol)[1]
        _pivot(T, leave, entering)
        basis[leave] = entering
        it += 1


def linprog_min(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-9,
                max_iter: int = 10_000) -> LpResult:
    """Minimise ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = len(c)
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = len(b_ub), len(b_eq)
    m = m_ub + m_eq
    # columns: x | slacks for <= rows | artificials
    n_cols = n + m_ub + m
    T = np.zeros((m + 1, n_cols + 1))
    for i in range(m_ub):
        sign = -1.0 if b_ub[i] < 0 else 1.0
        T[i, :n] = sign * A_ub[i]
        T[i, n + i] = sign
        T[i, -1] = sign * b_ub[i]
    for i in range(m_eq):
        sign = -1.0 if b_eq[i] < 0 else 1.0
        T[m_ub + i, :n] = sign * A_eq[i]
        T[m_ub + i, -1] = sign * b_eq[i]
    basis = []
    for i in range(m):
        if i < m_ub and T[i, n + i] > 0:
            basis.append(n + i)  # slack starts basic
        else:
            T[i, n + m_ub + i] = 1.0
            basis.append(n + m_ub + i)
    art = [b for b in basis if b >= n + m_ub]
    its = 0
    if art:
        # phase 1: minimise the sum of artificials
        T[-1] = 0.0
        T[-1, art] = 1.0
        for r, b in enumerate(basis):
            if b in art:
                T[-1] -= T[r]
        status, its = _run(T, basis, n_cols, tol, max_iter)
        if -T[-1, -1] > 1e-7 * max(1.0, np.abs(T[:-1, -1]).max()):
            return LpResult(np.full(n, np.nan), np.nan, "infeasible", its)
        # drive remaining artificials out of the basis
        for r, b in enumerate(basis):
            if b >= n + m_ub:
                j = next((j for j in range(n + m_ub) if abs(T[r, j]) > tol), None)
                if j is not None:
                    _pivot(T, r, j)
                    basis[r] = j
    # phase 2 on the original objective, artificials barred from entering
    T[-1] = 0.0
    T[-1, :n] = c
    for r, b in enumerate(basis):
        if b < n + m_ub and T[-1, b] != 0:
            T[-1] -= T[-1, b] * T[r]
    status, its2 = _run(T, basis, n + m_ub, tol, max_iter)
    x = np.zeros(n_cols)
    for r, b in enumerate(basis):
        x[b] = T[r, -1]
    if status == "unbounded":
        return LpResult(x[:n], -np.inf, status, its + its2)
    return LpResult(x[:n], float(c @ x[:n]), "optimal", its + its2)
