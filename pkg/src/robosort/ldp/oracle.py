"""Exhaustive search over a bounded integer box of layout designs."""
from __future__ import annotations

from dataclasses import dataclass

from .problem import (
    CostParams,
    DemandSpec,
    LayoutDesign,
    SystemParams,
    is_feasible,
    max_robots,
    min_robots,
    total_cost,
)


class InfeasibleDemand(ValueError):
    """No design in the search box meets the demand."""


@dataclass(frozen=True)
class SearchBox:
    max_n_h: int = 16
    max_n_v: int = 16
    max_staff: int = 40
    min_n_h: int = 2
    min_n_v: int = 2


def brute_force_ldp(demand: DemandSpec, costs: CostParams = CostParams(), sp: SystemParams = SystemParams(),
                    box: SearchBox = SearchBox()) -> tuple[LayoutDesign, float]:
    """Cheapest feasible design in the box.

    For a fixed grid and staffing the cost grows with the robot count, so
    each season takes the fewest robots that meet its demand.
    """
    best = None
    for n_h in range(box.min_n_h + box.min_n_h % 2, box.max_n_h + 1, 2):
        for n_v in range(box.min_n_v + box.min_n_v % 2, box.max_n_v + 1, 2):
            if (n_h - 1) * (n_v - 1) < demand.N_o:
                continue
            top = min(n_h + n_v, box.max_staff)
            robots = {}
            for season, T in (("H", demand.T_H), ("L", demand.T_L)):
                for nw in range(1, top + 1):
                    need = min_robots(n_h, n_v, nw, T, sp)
                    if need <= max_robots(n_h, n_v, nw, sp):
                        robots[season, nw] = need
            for nwh in range(1, top + 1):
                if ("H", nwh) not in robots:
                    continue
                for nwl in range(1, nwh + 1):
                    if ("L", nwl) not in robots:
                        continue
                    d = LayoutDesign(n_h, n_v, nwh, robots["H", nwh], nwl, robots["L", nwl])
                    c = total_cost(d, costs, sp.D)
                    if best is None or c < best[1] - 1e-9:
                        best = (d, c)
    if best is None:
        raise InfeasibleDemand("no design in the search box meets the demand")
    assert is_feasible(best[0], demand, sp)
    return best
