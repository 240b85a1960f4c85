"""Closed-form throughput as the number of staffed stations grows.

The curve rises to a peak and then falls because extra stations push the
average trip outward.  Prints the peak for a few square grids.
"""
from __future__ import annotations

import math

from robosort.model import critical_station_count, throughput_estimate

for n in (12, 16, 20):
    best = critical_station_count(n, n)
    print(f"{n}+{n}: peak at {best} staffed stations")
    for n_w in range(2, 2 * n + 1, max(2, n // 4)):
        e = throughput_estimate(n, n, n_w, math.inf)
        bar = "#" * int(e.throughput / 1000)
        print(f"  n_w={n_w:3d}  l={e.avg_travel_distance:6.2f} m  {e.throughput:8.0f}/h  {bar}")
