"""Demand and unit-cost sweeps of the layout optimizer."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .oracle import SearchBox, brute_force_ldp
from .problem import CostParams, DemandSpec, LayoutDesign, SystemParams, facility_cost, operations_cost
from .pslp import PslpHyper, pslp_solve


@dataclass(frozen=True)
class SweepRow:
    T_H: float
    T_L: float
    N_o: int
    M_s: float
    M_w: float
    design: LayoutDesign
    C_f: float
    C_o: float
    C_d: float
    feasible: bool

    @property
    def site_share(self) -> float:
        return self.C_f / self.C_d

    def as_row(self, costs: CostParams) -> dict:
        d = self.design
        labour = costs.P_w * (costs.theta * d.n_w_H + (1 - costs.theta) * d.n_w_L)
        robots = costs.P_r * (costs.theta * d.n_r_H + (1 - costs.theta) * d.n_r_L)
        return {
            "T_H": self.T_H, "T_L": self.T_L, "N_o": self.N_o, "M_s": self.M_s, "M_w": self.M_w,
            "n_h": d.n_h, "n_v": d.n_v, "n_w_L": d.n_w_L, "n_r_L": d.n_r_L, "n_w_H": d.n_w_H, "n_r_H": d.n_r_H,
            "C_f": self.C_f, "C_o": self.C_o, "C_d": self.C_d,
            "facility_share": self.C_f / self.C_d,
            "labour_share": labour / self.C_d,
            "robot_share": robots / self.C_d,
            "feasible": int(self.feasible),
        }


def optimise(demand: DemandSpec, costs: CostParams, sp: SystemParams = SystemParams(),
             method: str = "pslp", hyper: PslpHyper = PslpHyper(),
             box: SearchBox | None = None) -> tuple[LayoutDesign, bool]:
    if method == "pslp":
        r = pslp_solve(demand, costs, sp, hyper=hyper)
        return r.design, r.feasible
    if method == "exhaustive":
        return brute_force_ldp(demand, costs, sp, box or SearchBox(40, 40, 80))[0], True
    raise ValueError(f"unknown method {method!r}")


def demand_sweep(T_values, costs: CostParams = CostParams(), N_o: int = 100, off_peak_ratio: float = 0.8,
                 sp: SystemParams = SystemParams(), method: str = "pslp",
                 hyper: PslpHyper = PslpHyper()) -> list[SweepRow]:
    rows = []
    for T in T_values:
        dem = DemandSpec(float(T), off_peak_ratio * float(T), N_o)
        design, ok = optimise(dem, costs, sp, method, hyper)
        cf = facility_cost(design, costs, sp.D)
        co = operations_cost(design, costs)
        rows.append(SweepRow(dem.T_H, dem.T_L, N_o, costs.M_s, costs.M_w, design, cf, co, cf + co, ok))
    return rows


def cost_grid(T_values, M_s_values=(10.0,), M_w_values=(5000.0,), N_o_values=(100,),
              base: CostParams = CostParams(), **kw) -> list[SweepRow]:
    rows = []
    for N_o in N_o_values:
        for M_s in M_s_values:
            for M_w in M_w_values:
                rows += demand_sweep(T_values, replace(base, M_s=M_s, M_w=M_w), N_o, **kw)
    return rows


def turning_point(T, C) -> float:
    """Breakpoint of the best two-segment continuous piecewise-linear fit of ``C(T)``."""
    T = np.asarray(T, dtype=float)
    C = np.asarray(C, dtype=float)
    if len(T) < 4:
        raise ValueError("need at least four sweep points")
    best = None
    for k in range(1, len(T) - 1):
        hinge = np.maximum(T - T[k], 0.0)
        A = np.column_stack([np.ones_like(T), T, hinge])
        coef, *_ = np.linalg.lstsq(A, C, rcond=None)
        sse = float(((A @ coef - C) ** 2).sum())
        if best is None or sse < best[0]:
            best = (sse, T[k], coef[2])
    return float(best[1])


def slope_increases(T, C, at: float) -> bool:
    """True if the mean slope after ``at`` exceeds the mean slope before it."""
    T = np.asarray(T, dtype=float)
    C = np.asarray(C, dtype=float)
    lo, hi = T <= at, T >= at
    s_lo = np.polyfit(T[lo], C[lo], 1)[0] if lo.sum() >= 2 else np.nan
    s_hi = np.polyfit(T[hi], C[hi], 1)[0] if hi.sum() >= 2 else np.nan
    return bool(s_hi > s_lo)


def expansion_onset(rows: list[SweepRow]) -> float | None:
    """First demand whose optimal grid has more aisles than the one at the lowest demand
    (reshaping the same aisle count does not count)."""
    base = rows[0].design.n_h + rows[0].design.n_v
    for r in rows:
        if r.design.n_h + r.design.n_v > base:
            return r.T_H
    return None
