"""Layout design: cost model, constraints, PSLP solver and an exhaustive oracle."""
from .oracle import InfeasibleDemand, SearchBox, brute_force_ldp
from .problem import (
    CostParams,
    DemandSpec,
    LayoutDesign,
    Scenario,
    SystemParams,
    constraint_jacobian,
    constraint_values,
    discount,
    facility_cost,
    is_feasible,
    operations_cost,
    total_cost,
)
from .pslp import PslpHyper, PslpResult, lp_subproblem, polish, pslp_solve, repair
from .simplex import LpResult, linprog_min
from .sweep import SweepRow, cost_grid, demand_sweep, expansion_onset, slope_increases, turning_point

__all__ = [
    "CostParams", "DemandSpec", "LayoutDesign", "Scenario", "SystemParams", "constraint_jacobian",
    "constraint_values", "discount", "facility_cost", "is_feasible", "operations_cost", "total_cost",
    "PslpHyper", "PslpResult", "lp_subproblem", "polish", "pslp_solve", "repair", "LpResult", "linprog_min",
    "InfeasibleDemand", "SearchBox", "brute_force_ldp", "SweepRow", "cost_grid", "demand_sweep",
    "expansion_onset", "slope_increases", "turning_point",
]
