"""Dense two-phase simplex for ``A x = b, x >= 0``.

Pricing is by most negative reduced cost.  After ``STALL_PIVOTS``
consecutive degenerate pivots the entering choice falls back to Bland's rule
(lowest index with negative reduced cost) until the objective moves again.
Ties in the ratio test are broken lexicographically on the rows of the basis
inverse, which the tableau carries in its artificial columns.  The
zero-vibration rows all have a zero right-hand side, so the starting vertex is
highly degenerate; pure Bland pricing needs thousands of pivots there where
largest-coefficient pricing needs a few dozen.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-11
COST_TOL = 1e-11
STALL_PIVOTS = 50


class LpError(RuntimeError):
    """Iteration safeguard exceeded or an unbounded objective."""


@dataclass
class LpResult:
    feasible: bool
    x: np.ndarray | None
    basis: np.ndarray | None  # column indices of the final basis
    iterations: int
    infeasibility: float  # optimal phase-1 objective

    @property
    def witness(self):
        return self.x


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    piv = T[row]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, piv)


def _lex_row(T, rows, col, lex):
    """Row among ``rows`` whose scaled basis-inverse row is lexicographically smallest."""
    best = rows[0]
    key = T[best, lex] / T[best, col]
    for r in rows[1:]:
        cand = T[r, lex] / T[r, col]
        diff = cand - key
        nz = np.flatnonzero(np.abs(diff) > 1e-12 * (1.0 + np.abs(key)))
        if nz.size and diff[nz[0]] < 0.0:
            best, key = r, cand
    return best


def _iterate(T, basis, ncols, max_iter, it, lex):
    """Simplex pivots on tableau ``T`` (last row = reduced costs).

    ``lex`` selects the tableau columns holding the basis inverse.
    """
    m = T.shape[0] - 1
    stall = 0
    while True:
        cost = T[-1, :ncols]
        cand = np.flatnonzero(cost < -COST_TOL)
        if cand.size == 0:
            return it
        if it >= max_iter:
            raise LpError(f"simplex exceeded {max_iter} pivots (cycling safeguard)")
        col = cand[0] if stall >= STALL_PIVOTS else cand[np.argmin(cost[cand])]
        colv = T[:m, col]
        rows = np.flatnonzero(colv > PIVOT_TOL)
        if rows.size == 0:
            raise LpError("linear program is unbounded")
        ratios = T[rows, -1] / colv[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-14 * max(1.0, abs(best))]
        row = ties[0] if ties.size == 1 else _lex_row(T, ties, col, lex)
        stall = stall + 1 if T[row, -1] <= FEAS_TOL * 1e-3 else 0
        _pivot(T, row, col)
        basis[row] = col
        it += 1


def _phase1(A, b, max_iter):
    m, n = A.shape
    sign = np.where(b < 0.0, -1.0, 1.0)
    A = A * sign[:, None]
    b = b * sign
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    it = _iterate(T, basis, n + m, max_iter, 0, np.arange(n, n + m))
    infeas = -T[-1, -1]
    # drive zero-level artificials out of the basis, dropping redundant rows
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            cols = np.flatnonzero(np.abs(T[r, :n]) > PIVOT_TOL)
            if cols.size:
                _pivot(T, r, cols[0])
                basis[r] = cols[0]
            else:
                keep[r] = False
    return T, basis, keep, infeas, it


def _basic_solution(A, b, basis):
    # all original rows: a dropped tableau row is a combination of them, not
    # one of them, and the consistent overdetermined system solves exactly
    x = np.zeros(A.shape[1])
    B = A[:, basis]
    xb, *_ = np.linalg.lstsq(B, b, rcond=None)
    x[basis] = xb
    return x


def _max_iter(m, n):
    return 50 * (m + n)


def lp_feasible(A_eq, b_eq, max_iter: int | None = None) -> LpResult:
    """Phase-1 verdict for ``A_eq x = b_eq, x >= 0`` with a vertex witness."""
    A = np.asarray(A_eq, dtype=float)
    b = np.asarray(b_eq, dtype=float)
    m, n = A.shape
    T, basis, keep, infeas, it = _phase1(A, b, max_iter or _max_iter(m, n))
    if infeas > FEAS_TOL:
        return LpResult(False, None, None, it, float(infeas))
    basis = basis[keep]
    x = _basic_solution(A, b, basis)
    x[x < 0.0] = 0.0  # round-off on degenerate basics
    resid = np.max(np.abs(A @ x - b))
    if resid > FEAS_TOL:
        return LpResult(False, None, None, it, float(max(infeas, resid)))
    return LpResult(True, x, np.sort(basis), it, float(infeas))


def lp_solve(c, A_eq, b_eq, max_iter: int | None = None) -> LpResult:
    """Minimise ``c @ x`` over ``A_eq x = b_eq, x >= 0`` (two-phase)."""
    A = np.asarray(A_eq, dtype=float)
    b = np.asarray(b_eq, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    limit = max_iter or _max_iter(m, n)
    T, basis, keep, infeas, it = _phase1(A, b, limit)
    if infeas > FEAS_TOL:
        return LpResult(False, None, None, it, float(infeas))
    # keep the artificial columns (basis inverse) for tie-breaking only
    T = np.vstack([T[:m][keep], np.zeros((1, T.shape[1]))])
    basis = basis[keep]
    T[-1, :n] = c
    for r, j in enumerate(basis):
        T[-1] -= c[j] * T[r]
    it = _iterate(T, basis, n, limit + it, it, np.arange(n, n + m))
    x = _basic_solution(A, b, basis)
    x[x < 0.0] = 0.0
    return LpResult(True, x, np.sort(basis), it, float(infeas))
