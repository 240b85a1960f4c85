"""Cheapest layout per peak demand, and where the site starts to grow."""
from __future__ import annotations

from robosort.ldp import CostParams, demand_sweep, expansion_onset, turning_point

costs = CostParams(M_s=10.0)
T = [3000.0 * k for k in range(1, 11)]
rows = demand_sweep(T, costs, N_o=100)

print(f"{'T_H':>6} {'site':>6} {'n_w':>7} {'n_r':>9} {'C_d':>12} {'site share':>10}")
for r in rows:
    d = r.design
    print(f"{r.T_H:6.0f} {d.n_h:>2}x{d.n_v:<3} {d.n_w_H:>3}/{d.n_w_L:<3} {d.n_r_H:>4}/{d.n_r_L:<4} "
          f"{r.C_d:12.4g} {r.site_share:10.2f}")

print("largest slope increase at T_H =", turning_point(T, [r.C_d for r in rows]))
print("site first grows at T_H =", expansion_onset(rows))
