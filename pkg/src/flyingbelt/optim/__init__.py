"""LP feasibility, active-set QP and the shaper design procedure built on them."""

from .design import (
    Design,
    DesignError,
    DesignRequest,
    design,
    design_shaper,
    feasible,
    find_nmin,
    optimal_shaper,
    scan_nmin,
    shaper_length,
)
from .qp import KktResiduals, QpError, QpResult, kkt_residuals, qp_solve
from .simplex import FEAS_TOL, LpError, LpResult, lp_feasible, lp_solve

__all__ = [
    "Design",
    "DesignError",
    "DesignRequest",
    "FEAS_TOL",
    "KktResiduals",
    "LpError",
    "LpResult",
    "QpError",
    "QpResult",
    "design",
    "design_shaper",
    "feasible",
    "find_nmin",
    "kkt_residuals",
    "lp_feasible",
    "lp_solve",
    "optimal_shaper",
    "qp_solve",
    "scan_nmin",
    "shaper_length",
]
