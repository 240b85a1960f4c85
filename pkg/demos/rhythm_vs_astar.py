"""Run both controllers on the same 12+12 grid and compare what they deliver.

    python3 demos/rhythm_vs_astar.py [n_robots]
"""
from __future__ import annotations

import sys

from robosort.network import build_layout
from robosort.rcs.paths import PathFamily
from robosort.sim import SimConfig, run_simulation


def main(n_robots: int = 80) -> None:
    layout = build_layout(12, 12)
    family = PathFamily(layout)
    print(f"12+12 grid, {len(layout.stations)} stations, {len(layout.outlets)} outlets, {n_robots} robots")
    print(f"{'controller':>10} {'sorts/h':>9} {'service s':>10} {'ms/call':>8} {'conflicts':>9}")
    for ctl in ("rcs", "castar"):
        cfg = SimConfig(layout, controller=ctl, n_robots=n_robots, warmup=60.0, measure=300.0,
                        seed=1, record_trace=True)
        m = run_simulation(cfg, family)
        print(f"{ctl:>10} {m.throughput:9.0f} {m.avg_service_time:10.2f} "
              f"{m.decision_runtime:8.2f} {sum(m.conflicts.values()):9d}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 80)
