"""Dual-mode robust shaper-smoother design.

1. assemble the zero-vibration equality rows for both modes,
2. find the shortest feasible shaper by bisection over LP feasibility,
3. stretch it by the smoothing factor,
4. take the minimum-H2-norm shaper of that length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..modal import ModalSet
from ..shaper import ShaperFir, build_constraints
from .qp import QpResult, kkt_residuals, qp_solve
from .simplex import LpResult, lp_feasible


class DesignError(ValueError):
    pass


@dataclass(frozen=True)
class DesignRequest:
    modes: ModalSet
    Ts: float = 0.01
    smoothing: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.smoothing <= 1.0):
            raise DesignError(f"smoothing factor must lie in [0, 1], got {self.smoothing}")
        if not (self.Ts > 0.0):
            raise DesignError(f"sampling period must be positive, got {self.Ts}")


@dataclass
class Design:
    shaper: ShaperFir
    n_min: int
    n: int
    qp: QpResult


def feasible(modes, n: int, Ts: float, derivative: bool = True) -> LpResult:
    cs = build_constraints(modes, n, Ts, derivative)
    return lp_feasible(cs.A_eq, cs.b_eq)


def _slowest(modes) -> float:
    return min(w for w, _ in _pairs(modes))


def _pairs(modes):
    return modes.modes() if isinstance(modes, ModalSet) else list(modes)


def find_nmin(modes, Ts: float, derivative: bool = True) -> int:
    """Shortest shaper length with a feasible zero-vibration system.

    Brackets by doubling from one period of the slowest mode, then bisects.
    Feasibility is monotone in n: a feasible shaper padded with zeros stays
    feasible.
    """
    base = math.ceil(2.0 * math.pi / (_slowest(modes) * Ts))
    cap = 10 * base
    lo = 2
    if feasible(modes, lo, Ts, derivative).feasible:
        return lo
    hi = max(base, lo + 1)
    while not feasible(modes, hi, Ts, derivative).feasible:
        lo = hi
        hi *= 2
        if hi > cap:
            raise DesignError(f"no feasible shaper up to n = {cap}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(modes, mid, Ts, derivative).feasible:
            hi = mid
        else:
            lo = mid
    return hi


def scan_nmin(modes, Ts: float, derivative: bool = True, start: int = 2, stop: int | None = None) -> int:
    """Linear search for the shortest feasible length (reference for the bisection)."""
    stop = stop or 10 * math.ceil(2.0 * math.pi / (_slowest(modes) * Ts))
    for n in range(start, stop + 1):
        if feasible(modes, n, Ts, derivative).feasible:
            return n
    raise DesignError(f"no feasible shaper up to n = {stop}")


def shaper_length(n_min: int, smoothing: float) -> int:
    # round half up, so smoothing=1 gives exactly 2*n_min
    return n_min + int(math.floor(smoothing * n_min + 0.5))


def optimal_shaper(modes, n: int, Ts: float) -> tuple[ShaperFir, QpResult]:
    cs = build_constraints(modes, n, Ts)
    lp = lp_feasible(cs.A_eq, cs.b_eq)
    if not lp.feasible:
        raise DesignError(f"no feasible shaper of length {n}")
    res = qp_solve(cs.A_eq, cs.b_eq)
    h = np.maximum(res.x, 0.0)
    return ShaperFir(h, Ts), res


def design(req: DesignRequest) -> Design:
    n_min = find_nmin(req.modes, req.Ts)
    n = shaper_length(n_min, req.smoothing)
    sh, res = optimal_shaper(req.modes, n, req.Ts)
    return Design(sh, n_min, n, res)


def design_shaper(req: DesignRequest) -> ShaperFir:
    return design(req).shaper


__all__ = [
    "Design",
    "DesignError",
    "DesignRequest",
    "design",
    "design_shaper",
    "feasible",
    "find_nmin",
    "kkt_residuals",
    "optimal_shaper",
    "scan_nmin",
    "shaper_length",
]
