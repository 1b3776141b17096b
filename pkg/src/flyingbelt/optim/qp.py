"""Dual active-set solver for the minimum-norm point of ``{A x = b, x >= 0}``.

The iteration follows Goldfarb and Idnani, specialised to the Hessian ``2 I``
and coordinate bounds.  The working set is the equality rows plus the bounds
``x_j = 0`` for j in W; F is the complement.  Every iterate is dual feasible
(bound multipliers nonnegative) and the working set is kept linearly
independent, which means ``A[:, F]`` keeps full row rank.  The most violated
bound is added each round, dropping blocking bounds on the way, until no
bound is violated.  The method starts from the unconstrained minimum-norm
solution and needs no feasible vertex.  Degenerate vertices, where a primal
active-set walk can cycle, need no special treatment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .simplex import FEAS_TOL


class QpError(RuntimeError):
    def __init__(self, message, x=None, free=None):
        super().__init__(message)
        self.x = x
        self.free = free


@dataclass
class QpResult:
    x: np.ndarray
    nu: np.ndarray  # equality multipliers
    mu: np.ndarray  # bound multipliers (zero on free variables)
    iterations: int

    @property
    def objective(self) -> float:
        return float(self.x @ self.x)


@dataclass
class KktResiduals:
    stationarity: float
    primal: float
    complementarity: float
    dual: float  # most negative bound multiplier, as a positive number

    def max(self) -> float:
        return max(self.stationarity, self.primal, self.complementarity, self.dual)


def kkt_residuals(A, b, res: QpResult) -> KktResiduals:
    x, nu, mu = res.x, res.nu, res.mu
    stat = np.max(np.abs(2.0 * x - A.T @ nu - mu))
    primal = max(np.max(np.abs(A @ x - b)), max(0.0, -x.min()))
    comp = np.max(np.abs(mu * x))
    dual = max(0.0, -mu.min())
    return KktResiduals(float(stat), float(primal), float(comp), float(dual))


def _independent_rows(A, b, tol):
    """Indices of a maximal independent row subset; raises if ``b`` disagrees."""
    if A.shape[0] == 0:
        return np.arange(0)
    _, R, piv = sla.qr(A.T, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > 1e-12 * max(d[0], 1e-300))) if d.size else 0
    rows = np.sort(piv[:rank])
    if rank < A.shape[0]:
        y, *_ = np.linalg.lstsq(A[rows], b[rows], rcond=None)
        if np.max(np.abs(A @ y - b)) > tol * max(1.0, np.max(np.abs(b))):
            raise QpError("infeasible constraints (inconsistent equality rows)")
    return rows


def _face_solution(A, b, free):
    """Minimum-norm point with ``x_W = 0`` and its KKT multipliers."""
    AF = A[:, free]
    cf = sla.cho_factor(AF @ AF.T)
    w = sla.cho_solve(cf, b)
    x = np.zeros(A.shape[1])
    x[free] = AF.T @ w
    nu = 2.0 * w
    mu = -(A.T @ nu)
    mu[free] = 0.0
    return x, nu, mu


def qp_solve(A_eq, b_eq, tol: float = FEAS_TOL, max_iter: int | None = None) -> QpResult:
    """Minimise ``x @ x`` subject to ``A_eq x = b_eq`` and ``x >= 0``.

    Multipliers follow ``2 x = A_eq.T @ nu + mu``, with ``mu >= 0`` and
    ``mu * x = 0`` at the solution.
    """
    A0 = np.asarray(A_eq, dtype=float)
    b0 = np.asarray(b_eq, dtype=float)
    m0, n = A0.shape
    rows = _independent_rows(A0, b0, tol)
    A, b = A0[rows], b0[rows]
    free = np.ones(n, dtype=bool)
    x, nu, mu = _face_solution(A, b, free)
    max_iter = max_iter or 20 * n + 100
    it = 0

    def result():
        nu0 = np.zeros(m0)
        nu0[rows] = nu
        return QpResult(np.maximum(x, 0.0), nu0, mu, it)

    while True:
        F = np.flatnonzero(free)
        p = F[np.argmin(x[F])] if F.size else -1
        if p < 0 or x[p] >= -tol * 1e-3:
            return result()
        # add bound p, dropping blocking bounds until it becomes active
        while True:
            it += 1
            if it > max_iter:
                raise QpError(f"active-set iteration limit {max_iter} reached", x=x.copy(), free=F)
            F = np.flatnonzero(free)
            AF = A[:, F]
            cf = sla.cho_factor(AF @ AF.T)
            rE = sla.cho_solve(cf, A[:, p])
            # primal direction: half the projection of e_p onto null(A_F)
            z = np.zeros(n)
            z[F] = -0.5 * (AF.T @ rE)
            z[p] += 0.5
            rW = -(A.T @ rE)
            rW[free] = 0.0
            W = np.flatnonzero(rW > 1e-14)
            t1, l = np.inf, -1
            if W.size:
                ratios = mu[W] / rW[W]
                k = np.argmin(ratios)
                t1, l = ratios[k], W[k]
            zp = z[p]
            t2 = -x[p] / zp if zp > 1e-14 else np.inf
            t = min(t1, t2)
            if not np.isfinite(t):
                if x[p] >= -tol:
                    # the face is a single point and p is zero up to round-off
                    return result()
                raise QpError("infeasible constraints (no admissible dual step)")
            if np.isfinite(t2):
                x = x + t * z
            nu = nu - t * rE
            mu = mu - t * rW
            if t2 <= t1:
                free[p] = False
                x, nu, mu = _face_solution(A, b, free)
                break
            free[l] = True
            mu[l] = 0.0
