"""Exact per-cycle feasible path assignment (FPA) by branch and bound.

Each loaded robot at a station head either takes one of its feasible paths
entering in the current cycle, or waits (paying a delay penalty).  Paths may
not share a VP slot with each other or with slots already reserved.  Station
flow balance, when enabled, is enforced as ``|served_from_i - arriving_at_i| <= slack``;
``slack = 0`` is the literal per-cycle conservation rule, which with one
loading per station and cycle admits little more than waiting everywhere.
``slack = None`` (default) drops the balance rule, matching the online
controller, which has no notion of it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .network import Cell, GridLayout
from .rcs.paths import PathFamily
from .rcs.reservation import abs_phase


@dataclass(frozen=True)
class FpaOption:
    path_id: int
    cost: float  # s
    dest: int
    slots: frozenset[tuple[int, int]]  # (cell id, absolute phase)
    turns: int = 0
    length: int = 0


@dataclass
class FpaDemand:
    station: int
    outlet: Cell
    options: list[FpaOption]
    delay_penalty: float
    waiting: float = 0.0
    robot: int = 0


@dataclass
class FpaInstance:
    demands: list[FpaDemand]
    n_stations: int
    blocked: frozenset[tuple[int, int]] = frozenset()  # slots with zero remaining capacity
    balance_slack: int | None = None

    # ------------------------------------------------------------------ text
    def to_text(self) -> str:
        doc = {
            "format": "robosort-fpa/1",
            "n_stations": self.n_stations,
            "balance_slack": self.balance_slack,
            "blocked": sorted([list(s) for s in self.blocked]),
            "demands": [
                {
                    "station": d.station,
                    "outlet": list(d.outlet),
                    "delay_penalty": d.delay_penalty,
                    "waiting": d.waiting,
                    "robot": d.robot,
                    "options": [
                        {"path_id": o.path_id, "cost": o.cost, "dest": o.dest, "turns": o.turns,
                         "length": o.length, "slots": sorted([list(s) for s in o.slots])}
                        for o in d.options
                    ],
                }
                for d in self.demands
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_text(cls, text: str) -> FpaInstance:
        doc = json.loads(text)
        demands = [
            FpaDemand(
                station=d["station"], outlet=tuple(d["outlet"]), delay_penalty=d["delay_penalty"],
                waiting=d["waiting"], robot=d["robot"],
                options=[FpaOption(o["path_id"], o["cost"], o["dest"],
                                   frozenset(tuple(s) for s in o["slots"]), o["turns"], o["length"])
                         for o in d["options"]],
            )
            for d in doc["demands"]
        ]
        return cls(demands, doc["n_stations"], frozenset(tuple(s) for s in doc["blocked"]),
                   doc["balance_slack"])


@dataclass
class FpaSolution:
    choice: list[int]  # option index per demand, -1 = wait
    objective: float
    nodes: int = 0  # branch-and-bound nodes visited
    optimal: bool = False

    @property
    def served(self) -> int:
        return sum(c >= 0 for c in self.choice)


def build_instance(layout: GridLayout, family: PathFamily, demands: list[tuple[int, Cell]],
                   now: int = 0, tau_e: float = 0.5, blocked: set[tuple[int, int]] | None = None,
                   delay_penalty: float | None = None, balance_slack: int | None = None,
                   waiting: list[float] | None = None) -> FpaInstance:
    """FPA instance for robots entering at cycle ``now``.

    ``delay_penalty`` defaults, per demand, to its cheapest path cost plus one cycle.
    """
    out = []
    for n, (st, outlet) in enumerate(demands):
        opts = []
        for pid in family.candidates(st, outlet):
            p = family.paths[int(pid)]
            cells, dts = family.slots_of(int(pid))
            slots = frozenset(zip(cells.tolist(), abs_phase(now, dts).tolist()))
            opts.append(FpaOption(int(pid), p.duration_phases * tau_e, p.dest_station, slots,
                                  p.turn_count, p.length_cells))
        pen = delay_penalty if delay_penalty is not None else min(o.cost for o in opts) + 4 * tau_e
        out.append(FpaDemand(st, outlet, opts, pen, 0.0 if waiting is None else waiting[n], robot=n))
    return FpaInstance(out, len(layout.stations), frozenset(blocked or ()), balance_slack)


# ---------------------------------------------------------------------------
# feasibility
# ---------------------------------------------------------------------------

def violations(inst: FpaInstance, choice: list[int]) -> list[str]:
    """Constraint violations of an assignment; empty if feasible."""
    msgs = []
    if len(choice) != len(inst.demands):
        return ["one decision per demand required"]
    used: dict[tuple[int, int], int] = {}
    out = np.zeros(inst.n_stations, dtype=int)
    inc = np.zeros(inst.n_stations, dtype=int)
    for n, (d, c) in enumerate(zip(inst.demands, choice)):
        if c < -1 or c >= len(d.options):
            msgs.append(f"demand {n}: invalid option {c}")
            continue
        if c == -1:
            continue
        o = d.options[c]
        out[d.station] += 1
        inc[o.dest] += 1
        for s in o.slots:
            if s in inst.blocked:
                msgs.append(f"demand {n}: slot {s} has no capacity")
            if s in used:
                msgs.append(f"demands {used[s]} and {n} share slot {s}")
            used[s] = n
    for i in range(inst.n_stations if inst.balance_slack is not None else 0):
        if abs(out[i] - inc[i]) > inst.balance_slack:
            msgs.append(f"station {i}: flow imbalance {out[i] - inc[i]}")
    return msgs


def objective(inst: FpaInstance, choice: list[int]) -> float:
    return float(sum(d.delay_penalty if c == -1 else d.options[c].cost
                     for d, c in zip(inst.demands, choice)))


# ---------------------------------------------------------------------------
# exact solver
# ---------------------------------------------------------------------------

def solve_fpa_exact(inst: FpaInstance, node_limit: int = 50_000_000) -> FpaSolution:
    """Depth-first branch and bound, seeded with the all-wait assignment."""
    demands = inst.demands
    n = len(demands)
    if n == 0:
        return FpaSolution([], 0.0, 0, True)
    # slot sets as bitmasks
    index: dict[tuple[int, int], int] = {}
    for d in demands:
        for o in d.options:
            for s in o.slots:
                index.setdefault(s, len(index))
    blocked_mask = 0
    for s in inst.blocked:
        if s in index:
            blocked_mask |= 1 << index[s]
    opts: list[list[tuple[float, int, int, int]]] = []  # (cost, mask, dest, original index)
    for d in demands:
        row = []
        for j, o in enumerate(d.options):
            m = 0
            for s in o.slots:
                m |= 1 << index[s]
            if m & blocked_mask:
                continue
            row.append((o.cost, m, o.dest, j))
        row.sort(key=lambda x: (x[0], x[3]))
        opts.append(row)
    # branch on the demands with the fewest options first
    order = sorted(range(n), key=lambda i: (len(opts[i]), i))
    best_rest = [0.0] * (n + 1)
    for pos in range(n - 1, -1, -1):
        i = order[pos]
        cheapest = min([demands[i].delay_penalty] + [o[0] for o in opts[i]])
        best_rest[pos] = best_rest[pos + 1] + cheapest

    best_choice = [-1] * n
    best_obj = objective(inst, best_choice)
    choice = [-1] * n
    out = [0] * inst.n_stations
    inc = [0] * inst.n_stations
    slack = inst.balance_slack
    nodes = 0

    def balanced() -> bool:
        if slack is None:
            return True
        return all(abs(a - b) <= slack for a, b in zip(out, inc))

    def dfs(pos: int, used: int, cost: float):
        nonlocal best_obj, best_choice, nodes
        nodes += 1
        if nodes > node_limit:
            raise RuntimeError("FPA branch-and-bound node limit exceeded")
        if cost + best_rest[pos] >= best_obj - 1e-12:
            return
        if pos == n:
            if balanced():
                best_obj = cost
                best_choice = choice.copy()
            return
        i = order[pos]
        d = demands[i]
        branches = [(o[0], o) for o in opts[i] if not (o[1] & used)]
        branches.append((d.delay_penalty, None))
        branches.sort(key=lambda b: (b[0], b[1] is None))
        for c, o in branches:
            if o is None:
                choice[i] = -1
                dfs(pos + 1, used, cost + c)
            else:
                choice[i] = o[3]
                out[d.station] += 1
                inc[o[2]] += 1
                dfs(pos + 1, used | o[1], cost + c)
                out[d.station] -= 1
                inc[o[2]] -= 1
            choice[i] = -1

    dfs(0, 0, 0.0)
    return FpaSolution(best_choice, best_obj, nodes, True)


# ---------------------------------------------------------------------------
# heuristic (single-cycle form of the controller rule)
# ---------------------------------------------------------------------------

def heuristic_solve(inst: FpaInstance) -> FpaSolution:
    """Greedy assignment in the controller's order: longest waiting first, then station id.

    Each robot takes its cheapest free option (ties: fewer turns, then
    lower path id), skipping options that would push any destination's
    arrivals past the balance slack; otherwise it waits.
    """
    used: set[tuple[int, int]] = set(inst.blocked)
    inc = [0] * inst.n_stations
    choice = [-1] * len(inst.demands)
    order = sorted(range(len(inst.demands)),
                   key=lambda i: (-inst.demands[i].waiting, inst.demands[i].station, i))
    for i in order:
        d = inst.demands[i]
        ranked = sorted(range(len(d.options)),
                        key=lambda j: (d.options[j].cost, d.options[j].turns, d.options[j].path_id))
        for j in ranked:
            o = d.options[j]
            if inst.balance_slack is not None and inc[o.dest] + 1 > inst.balance_slack:
                continue
            if o.slots.isdisjoint(used):
                used |= o.slots
                inc[o.dest] += 1
                choice[i] = j
                break
    return FpaSolution(choice, objective(inst, choice))


def heuristic_gap(inst: FpaInstance, heuristic: FpaSolution | list[int],
                  exact: FpaSolution | None = None) -> float:
    """Heuristic objective over the exact optimum (>= 1)."""
    choice = heuristic.choice if isinstance(heuristic, FpaSolution) else list(heuristic)
    if violations(inst, choice):
        raise ValueError("heuristic assignment is infeasible")
    exact = exact or solve_fpa_exact(inst)
    h = objective(inst, choice)
    if exact.objective == 0:
        return 1.0 if h == 0 else math.inf
    return h / exact.objective


def random_instance(layout: GridLayout, family: PathFamily, rng: np.random.Generator,
                    n_demands: int, background: int = 0, tau_e: float = 0.5,
                    delay_penalty: float | None = None, balance_slack: int | None = None) -> FpaInstance:
    """Random instance: distinct stations, uniform outlets, ``background`` robots already reserved."""
    n_st = len(layout.stations)
    stations = rng.choice(n_st, size=min(n_demands, n_st), replace=False)
    outlets = layout.outlets
    demands = [(int(s), outlets[int(rng.integers(len(outlets)))]) for s in stations]
    blocked: set[tuple[int, int]] = set()
    # background traffic: paths reserved in earlier cycles that are still in the grid
    for _ in range(background):
        pid = int(rng.integers(len(family)))
        cells, dts = family.slots_of(pid)
        entry = -int(rng.integers(1, 6))
        cand = set(zip(cells.tolist(), abs_phase(entry, dts).tolist()))
        if cand.isdisjoint(blocked):
            blocked |= {s for s in cand if s[1] >= 0}
    waiting = [float(rng.integers(0, 3)) * 4 * tau_e for _ in demands]
    return build_instance(layout, family, demands, 0, tau_e, blocked, delay_penalty,
                          balance_slack, waiting)
