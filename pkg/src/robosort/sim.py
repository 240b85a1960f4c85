"""Closed-loop simulation of the sorting system.

Stations are saturated: a robot reaching the head of its station queue is
loaded at once with a parcel whose outlet is drawn uniformly.  Robots deliver,
leave the grid at an aisle end, and join the queue of the station they return
to.  The clock advances in cycles (RC-S) or in phase-length steps (CA*); both
use the same phase length so the two controllers share a time base.
"""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .network import Cell, GridLayout
from .rcs.controller import Candidate, RcsConfig, RcsController
from .rcs.kinematics import KinematicParams, RcsParams, derive_rcs_params
from .rcs.paths import PathFamily

DEFAULT_KINEMATICS = KinematicParams(v_max=2.0, c_max=math.inf, omega_r=math.inf, r_ls=0.5)


@dataclass
class SimConfig:
    layout: GridLayout
    controller: str = "rcs"  # "rcs" or "castar"
    n_robots: int = 40
    warmup: float = 120.0  # s
    measure: float = 600.0  # s
    seed: int = 0
    kinematics: KinematicParams = DEFAULT_KINEMATICS
    rcs_params: RcsParams | None = None
    rcs: RcsConfig = field(default_factory=RcsConfig)
    castar: dict = field(default_factory=dict)
    record_trace: bool = False
    check_invariants: bool = True

    def __post_init__(self):
        if self.measure <= 0:
            raise ValueError("measure must be positive")
        if self.n_robots < 1:
            raise ValueError("n_robots must be at least 1")
        if self.controller not in ("rcs", "castar"):
            raise ValueError(f"unknown controller {self.controller!r}")

    @property
    def params(self) -> RcsParams:
        if self.rcs_params is None:
            self.rcs_params = derive_rcs_params(self.kinematics, self.layout.cell_len_D)
        return self.rcs_params

    @property
    def n_active_stations(self) -> int:
        return len(self.layout.stations)


@dataclass
class RobotState:
    id: int
    phase: str = "IdleQueued"  # IdleQueued | Loaded | Moving | Returning
    station: int = 0
    outlet: Cell | None = None
    load_time: float = math.nan
    waiting: float = 0.0


@dataclass
class Trip:
    """One delivery: timestamps in seconds, ``moves`` as absolute-phase trajectory."""

    robot: int
    station: int
    outlet: Cell
    dest_station: int
    load_time: float
    entry_time: float
    drop_time: float
    exit_time: float
    length_cells: int
    drop_cells: int
    moves: np.ndarray | None = None  # (k, 2) int array of (phase, cell id)


@dataclass
class SimMetrics:
    throughput: float  # sorts/h
    avg_service_time: float  # s, leaving the station to the drop
    avg_load_to_drop: float  # s, loaded at the head of the queue to the drop
    avg_cycle_time: float  # s, load to return
    avg_network_time: float  # s, grid entry to exit
    avg_service_distance: float  # cells, station to station through the outlet
    avg_drop_distance: float  # cells, entry to drop
    decision_runtime: float  # ms per controller call
    completed: int
    admissions: dict[int, int] = field(default_factory=dict)
    flows: dict[tuple[Cell, Cell], int] = field(default_factory=dict)
    conflicts: dict[str, int] = field(default_factory=dict)
    trips: list[Trip] = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)

    def as_row(self) -> dict[str, float]:
        return {
            "throughput": self.throughput,
            "service_time": self.avg_service_time,
            "load_to_drop": self.avg_load_to_drop,
            "cycle_time": self.avg_cycle_time,
            "network_time": self.avg_network_time,
            "distance_cells": self.avg_service_distance,
            "drop_distance_cells": self.avg_drop_distance,
            "runtime_ms": self.decision_runtime,
            "completed": float(self.completed),
        }


class Deadlock(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# RC-S loop
# ---------------------------------------------------------------------------

def _initial_queues(n_robots: int, n_stations: int) -> list[deque]:
    queues = [deque() for _ in range(n_stations)]
    for r in range(n_robots):
        queues[r % n_stations].append(r)
    return queues


def _run_rcs(cfg: SimConfig, rng: np.random.Generator, family: PathFamily | None):
    layout = cfg.layout
    params = cfg.params
    tau_e, tau_c = params.tau_e, params.tau_c
    ctrl = RcsController(layout, params, cfg.rcs, family)
    fam = ctrl.family
    outlets = layout.outlets
    n_st = len(layout.stations)
    queues = _initial_queues(cfg.n_robots, n_st)
    ctrl.dest_load[:] = [len(q) for q in queues]
    robots = [RobotState(r, station=r % n_st) for r in range(cfg.n_robots)]
    returning: list[tuple[int, int, int]] = []  # heap-like list of (ready cycle, robot, station)
    import heapq

    end_time = cfg.warmup + cfg.measure
    n_cycles = int(math.ceil(end_time / tau_c))
    trips: list[Trip] = []
    runtime = 0.0
    calls = 0
    last_done = 0
    for now in range(n_cycles + 1):
        t_now = now * tau_c
        while returning and returning[0][0] <= now:
            _, rid, st = heapq.heappop(returning)
            robots[rid].phase = "IdleQueued"
            robots[rid].station = st
            queues[st].append(rid)
        cands = []
        for st, q in enumerate(queues):
            if not q:
                continue
            rob = robots[q[0]]
            if rob.phase == "IdleQueued":
                rob.phase = "Loaded"
                rob.outlet = outlets[int(rng.integers(len(outlets)))]
                rob.load_time = t_now
                rob.waiting = 0.0
            cands.append(Candidate(rob.id, st, rob.outlet, rob.waiting))
        t0 = time.perf_counter()
        res = ctrl.step(now, cands)
        runtime += time.perf_counter() - t0
        calls += 1
        for c in res.waiting:
            robots[c.robot].waiting = c.waiting
        for a in res.assignments:
            rob = robots[a.robot]
            queues[a.station].popleft()
            path = fam.paths[a.path_id]
            rob.phase = "Moving"
            entry_phase = 4 * (a.entry + 1)
            trip = Trip(
                robot=a.robot, station=a.station, outlet=a.outlet, dest_station=path.dest_station,
                load_time=rob.load_time, entry_time=entry_phase * tau_e,
                drop_time=a.drop_phase * tau_e, exit_time=a.exit_phase * tau_e,
                length_cells=path.length_cells,
                drop_cells=_moves_until(path, path.drops[a.outlet]),
            )
            if cfg.record_trace:
                cid = layout.cell_index
                trip.moves = np.array([(entry_phase + dt, cid[c]) for c, dt in path.trajectory],
                                      dtype=np.int64)
            trips.append(trip)
            # back in a station queue from the cycle after reaching the exit
            heapq.heappush(returning, (a.exit_phase // 4 + 1, a.robot, path.dest_station))
            last_done = now
        if now - last_done > 4 * cfg.rcs.n_p and cands:
            raise Deadlock(f"no dispatch since cycle {last_done}")
    return trips, runtime, calls, ctrl


def _moves_until(path, dt_drop: int) -> int:
    moves = 0
    prev = None
    for cell, dt in path.trajectory:
        if dt > dt_drop:
            break
        if prev is not None and cell != prev:
            moves += 1
        prev = cell
    return moves


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _summarise(cfg: SimConfig, trips: list[Trip], runtime: float, calls: int) -> SimMetrics:
    lo, hi = cfg.warmup, cfg.warmup + cfg.measure
    done = [t for t in trips if lo <= t.drop_time < hi]
    n = len(done)

    def mean(vals):
        vals = list(vals)
        return float(np.mean(vals)) if vals else math.nan

    returned = [t for t in done if t.exit_time < math.inf]
    admissions: dict[int, int] = {}
    for t in trips:
        if lo <= t.entry_time < hi:
            admissions[t.station] = admissions.get(t.station, 0) + 1
    return SimMetrics(
        throughput=n * 3600.0 / cfg.measure,
        avg_service_time=mean(t.drop_time - t.entry_time for t in done),
        avg_load_to_drop=mean(t.drop_time - t.load_time for t in done),
        avg_cycle_time=mean(t.exit_time - t.load_time for t in returned),
        avg_network_time=mean(t.exit_time - t.entry_time for t in returned),
        avg_service_distance=mean(t.length_cells for t in done),
        avg_drop_distance=mean(t.drop_cells for t in done),
        decision_runtime=1000.0 * runtime / max(calls, 1),
        completed=n,
        admissions=admissions,
        trips=trips if cfg.record_trace else [],
    )


def run_simulation(cfg: SimConfig, family: PathFamily | None = None) -> SimMetrics:
    """Run one replication.  ``family`` lets callers share a precomputed path family."""
    rng = np.random.default_rng(cfg.seed)
    if cfg.controller == "rcs":
        trips, runtime, calls, ctrl = _run_rcs(cfg, rng, family)
    else:
        from .baseline import run_castar

        trips, runtime, calls = run_castar(cfg, rng)
    metrics = _summarise(cfg, trips, runtime, calls)
    if cfg.record_trace:
        metrics.flows = flow_heatmap(trips, cfg.layout, cfg.warmup / cfg.params.tau_e,
                                     (cfg.warmup + cfg.measure) / cfg.params.tau_e)
        if cfg.check_invariants:
            metrics.conflicts = scan_conflicts(trips)
    metrics.info = {"controller": cfg.controller, "n_robots": cfg.n_robots, "seed": cfg.seed,
                    "tau_e": cfg.params.tau_e}
    return metrics


# ---------------------------------------------------------------------------
# replication
# ---------------------------------------------------------------------------

@dataclass
class Replicated:
    mean: dict[str, float]
    stderr: dict[str, float]
    runs: list[SimMetrics] = field(repr=False)


def replication_seeds(master_seed: int, n_reps: int) -> list[int]:
    seq = np.random.SeedSequence(master_seed)
    return [int(s.generate_state(1, dtype=np.uint64)[0]) for s in seq.spawn(n_reps)]


def aggregate(runs: list[SimMetrics]) -> Replicated:
    rows = [r.as_row() for r in runs]
    keys = rows[0].keys()
    mean, se = {}, {}
    for k in keys:
        vals = np.array([row[k] for row in rows], dtype=float)
        mean[k] = float(vals.mean())
        se[k] = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    return Replicated(mean, se, runs)


def replicate(cfg: SimConfig, n_reps: int, family: PathFamily | None = None,
              workers: int = 1) -> Replicated:
    """Independent replications with seeds spawned from ``cfg.seed``; mean and standard error."""
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    from dataclasses import replace

    cfgs = [replace(cfg, seed=s) for s in replication_seeds(cfg.seed, n_reps)]
    if workers > 1:
        from joblib import Parallel, delayed

        runs = Parallel(n_jobs=workers)(delayed(run_simulation)(c) for c in cfgs)
    else:
        if family is None and cfg.controller == "rcs":
            family = PathFamily(cfg.layout, cfg.rcs.max_turns, cfg.rcs.exit_policy, cfg.rcs.turn_slack)
        runs = [run_simulation(c, family) for c in cfgs]
    return aggregate(runs)


# ---------------------------------------------------------------------------
# trace analysis
# ---------------------------------------------------------------------------

def flow_heatmap(trips: list[Trip], layout: GridLayout, t_lo: float = -math.inf,
                 t_hi: float = math.inf) -> dict[tuple[Cell, Cell], int]:
    """Traversal counts per directed link for moves starting in ``[t_lo, t_hi)`` (in phases)."""
    counts = {(u, v): 0 for u, succ in layout.links.items() for v in succ}
    for trip in trips:
        if trip.moves is None:
            continue
        m = trip.moves
        for (t0, c0), (_, c1) in zip(m[:-1], m[1:]):
            if c0 != c1 and t_lo <= t0 < t_hi:
                key = (layout.cell_of_id(int(c0)), layout.cell_of_id(int(c1)))
                counts[key] = counts.get(key, 0) + 1
    return counts


def station_flows(flows: dict[tuple[Cell, Cell], int], layout: GridLayout) -> list[tuple[int, int]]:
    """(outgoing from entrance, incoming to exit) traffic per site, in site order."""
    out = []
    for s in layout.sites:
        enter = sum(n for (u, _), n in flows.items() if u == s.entrance_cell)
        leave = sum(n for (_, v), n in flows.items() if v == s.exit_cell)
        out.append((enter, leave))
    return out


def scan_conflicts(trips: list[Trip]) -> dict[str, int]:
    """Count vertex, following, swapping and cycle conflicts among recorded trajectories."""
    parts = [np.column_stack([np.full(len(t.moves), i), t.moves]) for i, t in enumerate(trips)
             if t.moves is not None and len(t.moves)]
    if not parts:
        return {"vertex": 0, "following": 0, "swapping": 0, "cycle": 0}
    rows = np.concatenate(parts)
    return scan_positions(rows[:, 0], rows[:, 1], rows[:, 2])


def scan_positions(agent: np.ndarray, t: np.ndarray, cell: np.ndarray) -> dict[str, int]:
    """Generic conflict scan over per-timestep positions ``(agent, t, cell)``.

    * vertex: two agents in one cell at one time;
    * following: an agent enters a cell another agent occupied one step earlier;
    * swapping: two agents exchange cells in one step;
    * cycle: three or more agents rotate through each other's cells in one step.
    """
    agent = np.asarray(agent, dtype=np.int64)
    t = np.asarray(t, dtype=np.int64)
    cell = np.asarray(cell, dtype=np.int64)
    key = t * (int(cell.max()) + 1) + cell
    order = np.argsort(key, kind="stable")
    k_sorted = key[order]
    dup = k_sorted[1:] == k_sorted[:-1]
    vertex = int(np.sum(dup & (agent[order][1:] != agent[order][:-1])))

    occ: dict[tuple[int, int], int] = {}
    for a, tt, c in zip(agent.tolist(), t.tolist(), cell.tolist()):
        occ.setdefault((tt, c), a)
    pos: dict[tuple[int, int], int] = {(a, tt): c for a, tt, c in zip(agent.tolist(), t.tolist(), cell.tolist())}
    following = swapping = 0
    succ_by_t: dict[int, dict[int, int]] = {}
    for (a, tt), c in pos.items():
        prev_owner = occ.get((tt - 1, c))
        if prev_owner is None or prev_owner == a:
            continue
        prev_cell = pos.get((a, tt - 1))
        if prev_cell is None or prev_cell == c:
            # a appeared or stayed; only moves into a just-vacated cell count
            if prev_cell is None:
                following += 1
            continue
        following += 1
        if pos.get((prev_owner, tt)) == prev_cell:
            swapping += 1
        succ_by_t.setdefault(tt, {})[prev_owner] = a
    cycles = 0
    for edges in succ_by_t.values():
        seen: set[int] = set()
        for start in edges:
            if start in seen:
                continue
            path, node = [], start
            while node in edges and node not in seen:
                seen.add(node)
                path.append(node)
                node = edges[node]
            if node in path and len(path) - path.index(node) >= 3:
                cycles += 1
    return {"vertex": vertex, "following": following, "swapping": swapping // 2, "cycle": cycles}
