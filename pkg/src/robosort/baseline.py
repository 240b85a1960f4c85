"""Cooperative A* with safe-interval path planning (SIPP) on the directed grid.

Robots move one cell per step at constant speed; a change of heading costs one
extra step spent in place.  Earlier plans are hard obstacles for later ones
(prioritized planning, priority = task arrival order).

Two trip modes are available.  In ``"two_leg"`` mode (the default) a robot
plans to an unloading node of its outlet when it is dispatched, parks there
after the drop, and plans its way out to an exit at the next planning instant;
a parked robot is an obstacle for everyone planned after it.  In ``"full"``
mode the whole trip (station, outlet, exit) is planned in one search.

A cell is unsafe at step ``t`` for a new robot if a planned robot occupies it
at ``t - 1``, ``t`` or ``t + 1``: this rules out vertex conflicts and
following conflicts in both directions.  Swaps cannot happen on one-way
aisles and no 2x2 block of aisle cells exists, so rotation cycles are
impossible too.
"""
from __future__ import annotations

import bisect
import heapq
import math
import time
from collections import deque
from dataclasses import dataclass

import numpy as np

from .network import HEADINGS, LEFT_OF, Cell, GridLayout, exit_cells

INF = 1 << 40
RIGHT_OF = {v: k for k, v in LEFT_OF.items()}


@dataclass(frozen=True)
class SippInterval:
    cell: Cell
    t_lo: int
    t_hi: int  # exclusive
    earliest_arrival: int


class ObstacleTable:
    """Occupied steps per cell from already planned robots, plus robots parked indefinitely."""

    def __init__(self):
        self.occ: dict[Cell, list[int]] = {}
        self.parked: dict[Cell, tuple[int, int]] = {}  # cell -> (from step, robot)

    def add_path(self, path: list[tuple[Cell, int]]) -> None:
        for cell, t in path:
            bisect.insort(self.occ.setdefault(cell, []), t)

    def park(self, cell: Cell, t_from: int, robot: int) -> None:
        if cell in self.parked:
            raise ValueError(f"cell {cell} already holds a parked robot")
        self.parked[cell] = (t_from, robot)

    def unpark(self, cell: Cell) -> tuple[int, int]:
        return self.parked.pop(cell)

    def occupied(self, cell: Cell, t: int) -> bool:
        p = self.parked.get(cell)
        if p is not None and t >= p[0]:
            return True
        times = self.occ.get(cell)
        if not times:
            return False
        i = bisect.bisect_left(times, t)
        return i < len(times) and times[i] == t

    def prune(self, t_min: int) -> None:
        """Forget occupancy before ``t_min``."""
        for cell in list(self.occ):
            times = self.occ[cell]
            i = bisect.bisect_left(times, t_min)
            if i:
                del times[:i]
            if not times:
                del self.occ[cell]

    def safe_intervals(self, cell: Cell, t_from: int) -> list[tuple[int, int]]:
        """Maximal runs ``[lo, hi)`` of safe steps from ``t_from`` onwards."""
        times = self.occ.get(cell, ())
        out = []
        lo = t_from
        if times:
            i = bisect.bisect_left(times, t_from - 1)
            for t in times[i:]:
                bad_lo = t - 1
                if bad_lo > lo:
                    out.append((lo, bad_lo))
                lo = max(lo, t + 2)
        out.append((lo, INF))
        p = self.parked.get(cell)
        if p is not None:
            stop = p[0] - 1
            out = [(a, min(b, stop)) for a, b in out if a < stop]
        return out


class _Heuristics:
    """Lower bounds on remaining steps, ignoring other robots and turn costs."""

    def __init__(self, layout: GridLayout, exits: set[Cell]):
        self.layout = layout
        self.pred: dict[Cell, list[Cell]] = {}
        for u, succ in layout.links.items():
            for v in succ:
                self.pred.setdefault(v, []).append(u)
        self.exits = frozenset(exits)
        self._cache: dict[tuple, dict[Cell, int]] = {}
        self.to_exit = self.towards(self.exits)

    def _reverse_dijkstra(self, seeds: dict[Cell, int]) -> dict[Cell, int]:
        dist = dict(seeds)
        heap = [(d, c) for c, d in seeds.items()]
        heapq.heapify(heap)
        while heap:
            d, c = heapq.heappop(heap)
            if d > dist.get(c, INF):
                continue
            for p in self.pred.get(c, ()):
                if d + 1 < dist.get(p, INF):
                    dist[p] = d + 1
                    heapq.heappush(heap, (d + 1, p))
        return dist

    def towards(self, targets: frozenset[Cell]) -> dict[Cell, int]:
        key = ("to", targets)
        h = self._cache.get(key)
        if h is None:
            h = self._cache[key] = self._reverse_dijkstra({c: 0 for c in targets})
        return h

    def via(self, targets: frozenset[Cell]) -> dict[Cell, int]:
        """Steps to pass one of ``targets`` and then reach an exit."""
        key = ("via", targets)
        h = self._cache.get(key)
        if h is None:
            seeds = {u: self.to_exit[u] for u in targets if u in self.to_exit}
            h = self._cache[key] = self._reverse_dijkstra(seeds)
        return h


def _moves(layout: GridLayout, cell: Cell, heading: str, left_only: bool):
    for nxt in layout.links.get(cell, ()):
        step = (nxt[0] - cell[0], nxt[1] - cell[1])
        if step == HEADINGS[heading]:
            yield nxt, heading, False
        elif step == HEADINGS[LEFT_OF[heading]]:
            yield nxt, LEFT_OF[heading], True
        elif not left_only and step == HEADINGS[RIGHT_OF[heading]]:
            yield nxt, RIGHT_OF[heading], True


def sipp_plan(layout: GridLayout, start: Cell, heading: str, goals: set[Cell],
              obstacles: ObstacleTable, t_start: int, via: set[Cell] | None = None,
              horizon: int = 400, left_only: bool = True, heuristics: _Heuristics | None = None,
              appear: bool = True, park_at_goal: bool = False) -> list[tuple[Cell, int]] | None:
    """Time-minimal conflict-free path from ``start`` to any of ``goals``.

    With ``appear`` the robot waits off the grid and may show up at ``start``
    at any safe step ``>= t_start``; otherwise it already stands on ``start``
    at ``t_start``.  With ``via`` the path must pass one of those cells before
    reaching a goal.  With ``park_at_goal`` the goal cell must stay safe
    forever after arrival.  Returns per-step positions ``[(cell, t), ...]``,
    or ``None`` if no plan arrives within ``horizon`` steps of ``t_start``.
    """
    h = heuristics or _Heuristics(layout, goals)
    goals_f = frozenset(goals)
    h_goal = h.to_exit if goals_f == h.exits else h.towards(goals_f)
    if via:
        h_via = h.via(frozenset(via)) if goals_f == h.exits else h.towards(frozenset(via))
    else:
        h_via = h_goal
    t_max = t_start + horizon
    via = via or set()

    iv_cache: dict[Cell, list[tuple[int, int]]] = {}

    def intervals(c: Cell):
        iv = iv_cache.get(c)
        if iv is None:
            iv = iv_cache[c] = obstacles.safe_intervals(c, t_start)
        return iv

    def hval(c: Cell, stage: int) -> int:
        if stage == 0:
            v = h_via.get(c, INF)
            # via heuristics towards non-exit goals only bound the first part
            return v
        return h_goal.get(c, INF)

    open_heap: list = []
    best: dict = {}
    parent: dict = {}
    counter = 0
    stage0 = 0 if via and start not in via else 1
    for k, (lo, hi) in enumerate(intervals(start)):
        if lo > t_max:
            break
        if not appear and not lo <= t_start < hi:
            continue
        state = (start, k, heading, stage0)
        best[state] = lo
        parent[state] = None
        heapq.heappush(open_heap, (lo + hval(start, stage0), counter, lo, state))
        counter += 1
    while open_heap:
        f, _, g, state = heapq.heappop(open_heap)
        if g > best.get(state, INF):
            continue
        cell, k, hd, stage = state
        if g > t_max:
            continue
        hi = intervals(cell)[k][1]
        if stage == 1 and cell in goals and (not park_at_goal or hi == INF):
            return _unwind(parent, state, best)
        for nxt, nhd, turned in _moves(layout, cell, hd, left_only):
            depart = g + (1 if turned else 0)
            nstage = 1 if (stage == 1 or nxt in via) else 0
            for nk, (lo2, hi2) in enumerate(intervals(nxt)):
                if hi2 <= depart + 1:
                    continue
                if lo2 > hi:  # would have to stay past our interval
                    break
                t_a = max(depart + 1, lo2)
                if t_a - 1 >= hi or t_a >= hi2 or t_a > t_max:
                    continue
                ns = (nxt, nk, nhd, nstage)
                if t_a < best.get(ns, INF):
                    best[ns] = t_a
                    parent[ns] = state
                    heapq.heappush(open_heap, (t_a + hval(nxt, nstage), counter, t_a, ns))
                    counter += 1
    return None


def _unwind(parent, state, best) -> list[tuple[Cell, int]]:
    chain = []
    while state is not None:
        chain.append((state[0], best[state]))
        state = parent[state]
    chain.reverse()
    out: list[tuple[Cell, int]] = []
    for (cell, t), nxt in zip(chain, chain[1:] + [None]):
        if nxt is None:
            out.append((cell, t))
            break
        for tt in range(t, nxt[1]):
            out.append((cell, tt))
    return out


@dataclass
class AgentTask:
    """A planning request.  ``outlet`` set: deliver; ``outlet`` ``None``: leave the grid."""

    robot: int
    station: int
    outlet: Cell | None
    start: Cell
    heading: str
    t_start: int
    appear: bool = True
    via_outlet: bool = True  # full trip: pass the outlet, then exit


def ca_star_assign(layout: GridLayout, agents: list[AgentTask], obstacles: ObstacleTable | None = None,
                   horizon: int = 400, left_only: bool = True, exit_policy: str = "any",
                   heuristics: _Heuristics | None = None, trip_mode: str = "full",
                   ) -> dict[int, list[tuple[Cell, int]] | None]:
    """Plan agents one by one in the given priority order; each sees earlier plans as obstacles.

    In ``"two_leg"`` mode a delivery request plans only to the outlet and the
    robot is parked there (the caller later issues an exit request).
    """
    obstacles = obstacles if obstacles is not None else ObstacleTable()
    exits = exit_cells(layout, exit_policy)
    heur = heuristics or _Heuristics(layout, exits)
    plans: dict[int, list[tuple[Cell, int]] | None] = {}
    for a in agents:
        if a.outlet is None:
            # a parked robot leaving: lift its own parking while it plans
            saved = obstacles.parked.pop(a.start, None) if not a.appear else None
            path = sipp_plan(layout, a.start, a.heading, exits, obstacles, a.t_start, None,
                             horizon, left_only, heur, appear=a.appear)
            if path is None and saved is not None:
                obstacles.parked[a.start] = saved
        else:
            drop = {u for u in layout.unloading_nodes_of(a.outlet) if u in layout.nodes}
            if trip_mode == "full":
                path = sipp_plan(layout, a.start, a.heading, exits, obstacles, a.t_start, drop,
                                 horizon, left_only, heur, appear=a.appear)
            else:
                path = sipp_plan(layout, a.start, a.heading, drop, obstacles, a.t_start, None,
                                 horizon, left_only, heur, appear=a.appear, park_at_goal=True)
        plans[a.robot] = path
        if path is not None:
            obstacles.add_path(path)
            if a.outlet is not None and trip_mode == "two_leg":
                obstacles.park(path[-1][0], path[-1][1] + 1, a.robot)
    return plans


def heading_between(a: Cell, b: Cell) -> str:
    step = (b[0] - a[0], b[1] - a[1])
    for name, d in HEADINGS.items():
        if d == step:
            return name
    raise ValueError(f"cells {a} and {b} are not adjacent")


# ---------------------------------------------------------------------------
# closed-loop simulation with CA*
# ---------------------------------------------------------------------------

def run_castar(cfg, rng: np.random.Generator):
    """Closed-loop run mirroring the RC-S loop: planning once per cycle."""
    from .rcs.paths import _station_for_exit
    from .sim import Deadlock, RobotState, Trip, _initial_queues

    layout = cfg.layout
    opts = {"horizon": 400, "left_only": True, "exit_policy": "any", "trip_mode": "two_leg",
            "exit_cadence": "step"}
    opts.update(cfg.castar)
    tau_e = cfg.params.tau_e
    spc = 4  # steps per cycle
    exits = exit_cells(layout, opts["exit_policy"])
    heur = _Heuristics(layout, exits)
    dest_of = _station_for_exit(layout)
    outlets = layout.outlets
    cid = layout.cell_index
    n_st = len(layout.stations)
    queues = _initial_queues(cfg.n_robots, n_st)
    robots = [RobotState(r, station=r % n_st) for r in range(cfg.n_robots)]
    obstacles = ObstacleTable()
    returning: list[tuple[int, int, int]] = []
    parked: dict[int, tuple[Cell, str, int, Trip, list]] = {}  # robot -> (cell, heading, since, trip, moves)
    trips: list[Trip] = []
    runtime = 0.0
    calls = 0
    n_cycles = int(math.ceil((cfg.warmup + cfg.measure) / cfg.params.tau_c))
    last_done = 0

    def finish(trip: Trip, path: list[tuple[Cell, int]], rid: int):
        trip.exit_time = path[-1][1] * tau_e
        trip.dest_station = dest_of[path[-1][0]]
        trip.length_cells = sum(1 for (c0, _), (c1, _) in zip(trip.moves[:-1], trip.moves[1:]) if c0 != c1)
        trip.moves = np.array([(t, cid[c]) for c, t in trip.moves], dtype=np.int64)
        heapq.heappush(returning, (path[-1][1] // spc + 1, rid, trip.dest_station))

    for step in range(spc * n_cycles + 1):
        now, t_now = step // spc, step
        boundary = step % spc == 0
        agents = []
        order = {}
        for rid, (cell, hd, since, _, _) in parked.items():
            if since <= t_now and (boundary or opts["exit_cadence"] == "step"):
                agents.append(AgentTask(rid, -1, None, cell, hd, t_now, appear=False))
                order[rid] = (since * tau_e, -1)
        if boundary:
            while returning and returning[0][0] <= now:
                _, rid, st = heapq.heappop(returning)
                robots[rid].phase = "IdleQueued"
                robots[rid].station = st
                queues[st].append(rid)
            for st, q in enumerate(queues):
                if not q:
                    continue
                rob = robots[q[0]]
                if rob.phase == "IdleQueued":
                    rob.phase = "Loaded"
                    rob.outlet = outlets[int(rng.integers(len(outlets)))]
                    rob.load_time = t_now * tau_e
                site = layout.stations[st]
                agents.append(AgentTask(rob.id, st, rob.outlet, site.entrance_cell,
                                        layout.aisles[site.entrance_aisle].heading, t_now))
                order[rob.id] = (rob.load_time, st)
            calls += 1
        if not agents:
            continue
        agents.sort(key=lambda a: (order[a.robot], a.robot))
        t0 = time.perf_counter()
        if boundary and now % 16 == 0:
            obstacles.prune(t_now - 2)
        plans = ca_star_assign(layout, agents, obstacles, opts["horizon"], opts["left_only"],
                               opts["exit_policy"], heur, opts["trip_mode"])
        runtime += time.perf_counter() - t0
        for a in agents:
            path = plans[a.robot]
            rob = robots[a.robot]
            if path is None:
                if a.outlet is not None:
                    rob.waiting += cfg.params.tau_c
                continue
            last_done = now
            if a.outlet is None:
                cell, _, since, trip, moves = parked.pop(a.robot)
                moves.extend((cell, t) for t in range(since, t_now))
                moves.extend(path)
                trip.moves = moves
                finish(trip, path, a.robot)
                continue
            queues[a.station].popleft()
            rob.phase = "Moving"
            drop = set(layout.unloading_nodes_of(a.outlet))
            t_drop = next(t for c, t in path if c in drop)
            drop_moves = sum(1 for (c0, t0_), (c1, _) in zip(path[:-1], path[1:]) if c0 != c1 and t0_ < t_drop)
            trip = Trip(
                robot=a.robot, station=a.station, outlet=a.outlet, dest_station=-1,
                load_time=rob.load_time, entry_time=(path[0][1] + 1) * tau_e, drop_time=t_drop * tau_e,
                exit_time=math.inf, length_cells=0, drop_cells=drop_moves, moves=None,
            )
            trips.append(trip)
            if opts["trip_mode"] == "full":
                trip.moves = list(path)
                finish(trip, path, a.robot)
            else:
                end, t_end = path[-1]
                hd = heading_between(path[-2][0], end) if len(path) > 1 else a.heading
                # the last move into the drop cell fixes the heading
                for (c0, _), (c1, _) in zip(path[:-1], path[1:]):
                    if c0 != c1:
                        hd = heading_between(c0, c1)
                parked[a.robot] = (end, hd, t_end + 1, trip, list(path))
        if now - last_done > 200:
            raise Deadlock(f"CA*: no plan found since cycle {last_done}")
    # trips still parked at the end keep exit_time = inf and a partial trajectory
    for rid, (cell, _, since, trip, moves) in parked.items():
        trip.moves = np.array([(t, cid[c]) for c, t in moves], dtype=np.int64)
    return trips, runtime, calls
