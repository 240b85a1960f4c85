"""Regenerate tests/golden.json from the current implementation.

Run only after a change that is meant to move these values:

    python3 tests/_freeze_golden.py
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from robosort.fpa import heuristic_solve, random_instance, solve_fpa_exact
from robosort.ldp import DemandSpec, pslp_solve
from robosort.model import throughput_estimate
from robosort.network import build_layout
from robosort.rcs.paths import PathFamily
from robosort.sim import SimConfig, run_simulation

OUT = Path(__file__).parent / "golden.json"

SIM_CASES = {
    "rcs_8x8": dict(controller="rcs", n_robots=24),
    "castar_8x8": dict(controller="castar", n_robots=24),
}


def sim_row(case: dict) -> dict:
    cfg = SimConfig(build_layout(8, 8), warmup=30.0, measure=120.0, seed=3, **case)
    row = run_simulation(cfg).as_row()
    row.pop("runtime_ms")
    return row


def fpa_objectives(n: int = 30, background: int = 3) -> dict:
    lay = build_layout(4, 4)
    fam = PathFamily(lay)
    rng = np.random.default_rng(11)
    exact, heur = [], []
    for _ in range(n):
        inst = random_instance(lay, fam, rng, int(rng.integers(2, 9)), background=background)
        exact.append(solve_fpa_exact(inst).objective)
        heur.append(heuristic_solve(inst).objective)
    return {"exact": exact, "heuristic": heur}


def main():
    gold = {
        "layout_sha256": {f"{n}x{n}": hashlib.sha256(build_layout(n, n).to_text().encode()).hexdigest()
                          for n in (4, 12)},
        "path_counts": {f"{n}x{n}": len(PathFamily(build_layout(n, n))) for n in (4, 8, 12)},
        "model": {
            str(n_w): {"l_bar": e.avg_travel_distance, "throughput": e.throughput}
            for n_w in (6, 12, 24)
            for e in [throughput_estimate(12, 12, n_w, math.inf)]
        },
        "sim": {k: sim_row(v) for k, v in SIM_CASES.items()},
        "fpa": fpa_objectives(),
        "pslp": {},
    }
    for T in (3000, 9000, 21000):
        r = pslp_solve(DemandSpec(float(T), 0.8 * T, 100))
        gold["pslp"][str(T)] = {"design": r.design.as_vector().astype(int).tolist(), "cost": r.cost}
    OUT.write_text(json.dumps(gold, indent=1, sort_keys=True) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
