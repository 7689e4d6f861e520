"""Dense two-phase tableau simplex for desk-scale linear programs.

Solves ``min/max c.x`` subject to rows ``A_i.x (<=|>=|=) b_i`` and ``x >= 0``.
Entering columns use Dantzig's rule; after a run of degenerate pivots the solver
switches to Bland's rule (smallest index) until progress resumes, which rules out
cycling.  Ratio-test ties go to the smallest basic index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-9
DEGENERATE_SWITCH = 25


@dataclass
class LPResult:
    status: str
    x: np.ndarray
    value: float
    duals: np.ndarray
    iterations: int
    basis: np.ndarray

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    def __init__(self, T, basis, allowed):
        self.T = T
        self.basis = basis
        self.allowed = allowed
        self.iterations = 0

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        nz = np.flatnonzero(col)
        if len(nz):
            T[nz] -= np.outer(col[nz], T[r])
        self.basis[r] = j

    def run(self, max_iter, tol):
        """Minimize the objective stored in the last row (reduced costs)."""
        T = self.T
        m = T.shape[0] - 1
        degenerate = 0
        while True:
            if self.iterations >= max_iter:
                return "iteration_limit"
            red = T[m, :-1]
            cand = np.flatnonzero((red < -tol) & self.allowed)
            if not len(cand):
                return "optimal"
            if degenerate >= DEGENERATE_SWITCH:
                j = int(cand[0])
            else:
                j = int(cand[np.argmin(red[cand])])
            col = T[:m, j]
            rows = np.flatnonzero(col > tol)
            if not len(rows):
                return "unbounded"
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            r = int(ties[np.argmin(self.basis[ties])])
            degenerate = degenerate + 1 if T[r, -1] <= tol else 0
            self.pivot(r, j)
            self.iterations += 1


def solve_lp(c, A, b, senses, maximize: bool = False, tol: float = TOL, max_iter: int | None = None) -> LPResult:
    """Solve a small dense LP with nonnegative variables.

    ``duals`` are the multipliers ``y`` with ``c_B = B^T y`` for the original
    rows, in the sign convention of the stated objective (for a minimization with
    ``>=`` rows they are nonnegative at optimality).
    """
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).copy()
    senses = list(senses)
    m, n = A.shape
    if len(b) != m or len(senses) != m or len(c) != n:
        raise ValueError("inconsistent LP dimensions")
    A = A.copy()
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1
    swap = {"<=": ">=", ">=": "<=", "=": "="}
    senses = [swap[s] if f else s for s, f in zip(senses, flip)]

    n_slack = sum(s != "=" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    ncols = n + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.zeros(m, dtype=np.int64)
    art_cols = []
    sc, ac = n, n + n_slack
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, sc] = 1.0
            basis[i] = sc
            sc += 1
        else:
            if s == ">=":
                T[i, sc] = -1.0
                sc += 1
            T[i, ac] = 1.0
            basis[i] = ac
            art_cols.append(ac)
            ac += 1
    is_art = np.zeros(ncols, dtype=bool)
    is_art[art_cols] = True
    if max_iter is None:
        max_iter = 50 * (m + ncols) + 1000

    tab = _Tableau(T, basis, np.ones(ncols, dtype=bool))
    # phase 1: minimize the sum of artificials
    if art_cols:
        art_rows = np.flatnonzero(is_art[basis])
        T[m, :] = 0.0
        T[m, art_cols] = 1.0
        T[m] -= T[art_rows].sum(axis=0)
        status = tab.run(max_iter, tol)
        if status == "iteration_limit":
            return _fail(status, n, m, tab)
        if -T[m, -1] > tol * max(1.0, np.abs(b).max(initial=0.0)) * 10:
            return _fail("infeasible", n, m, tab)
        # drive remaining artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if is_art[basis[r]]:
                row = np.abs(T[r, :ncols])
                row[is_art] = 0.0
                j = int(np.argmax(row))
                if row[j] > tol:
                    tab.pivot(r, j)
                else:
                    keep[r] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[m:]])
            tab.T = T
            tab.basis = basis = basis[keep]
    active_rows = np.flatnonzero(keep) if art_cols else np.arange(m)
    m_act = len(active_rows)

    cost = np.zeros(ncols)
    cost[:n] = -c if maximize else c
    tab.allowed = ~is_art
    T[m_act, :] = 0.0
    T[m_act, :ncols] = cost
    T[m_act] -= cost[basis] @ T[:m_act]
    status = tab.run(max_iter, tol)
    if status != "optimal":
        return _fail(status, n, m, tab)

    # refine basic solution and duals against the original data
    full = np.zeros((m, ncols))
    full[:, :n] = A
    sc, ac = n, n + n_slack
    for i, s in enumerate(senses):
        if s == "<=":
            full[i, sc] = 1.0
            sc += 1
        else:
            if s == ">=":
                full[i, sc] = -1.0
                sc += 1
            full[i, ac] = 1.0
            ac += 1
    B = full[np.ix_(active_rows, basis)]
    try:
        xb = np.linalg.solve(B, b[active_rows])
        y_act = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        xb = T[:m_act, -1].copy()
        y_act = np.zeros(m_act)
    xb = np.where(np.abs(xb) < tol, 0.0, xb)
    xfull = np.zeros(ncols)
    xfull[basis] = xb
    x = xfull[:n]
    y = np.zeros(m)
    y[active_rows] = y_act
    y[flip] *= -1
    if maximize:
        y = -y
    value = float(c @ x)
    return LPResult("optimal", x, value, y, tab.iterations, basis.copy())


def _fail(status, n, m, tab):
    return LPResult(status, np.full(n, np.nan), float("nan"), np.full(m, np.nan), tab.iterations, tab.basis.copy())
