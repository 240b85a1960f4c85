"""Virtual-platoon timetable and feasible delivery paths.

Every aisle releases one virtual platoon (VP) per cycle.  Position ``p`` along
an aisle (entry boundary cell = -1) is visited by a VP at every phase ``t``
with ``t % 4 == p % 4``.  With the aisle parity of :mod:`robosort.network`
this single rule gives the checkerboard pattern at intersections: the
horizontal and vertical VPs reach a conflict node two phases apart.

A path is stored relative to its *entry cycle* ``e``: the robot sits on the
entrance cell at phase ``4e - 1`` and enters the grid at phase ``4e``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..network import LEFT_OF, Aisle, Cell, GridLayout, NodeKind, exit_cells


@dataclass(frozen=True)
class FeasiblePath:
    """One delivery route from a station entrance to an exit.

    ``trajectory`` lists the robot's cell at every phase offset ``dt`` from
    the entrance (``dt = -1``) to the exit.  ``vp_steps`` are the
    (cell, dt) slots that must be reserved: the route itself plus the extra
    slots blocked around each turn.  ``drops`` maps every outlet the route can
    serve to the phase offset of its first pass at one of the outlet's
    unloading nodes.
    """

    origin_station: int
    dest_station: int
    exit_cell: Cell
    aisles: tuple[str, ...]
    trajectory: tuple[tuple[Cell, int], ...]
    vp_steps: tuple[tuple[Cell, int], ...]
    drops: dict[Cell, int] = field(repr=False)
    turn_count: int = 0
    length_cells: int = 0

    @property
    def duration_phases(self) -> int:
        """Phases from entering the grid to standing on the exit cell."""
        return self.trajectory[-1][1]

    def travel_time(self, tau_e: float) -> float:
        return self.duration_phases * tau_e

    @property
    def cells(self) -> tuple[Cell, ...]:
        return tuple(c for c, _ in self.trajectory)


def is_vp_slot(layout: GridLayout, cell: Cell, t: int) -> bool:
    """True if some VP occupies ``cell`` at phase ``t``."""
    for name in layout.aisles_through.get(cell, ()):
        if (t - layout.aisles[name].position(cell)) % 4 == 0:
            return True
    return False


def vp_cells_at(layout: GridLayout, t: int, include_boundary: bool = False) -> list[Cell]:
    """Cells holding a VP at phase ``t``."""
    out = []
    for aisle in layout.aisles.values():
        cells = aisle.cells if include_boundary else aisle.cells[1:-1]
        start = -1 if include_boundary else 0
        for p, cell in enumerate(cells, start=start):
            if (t - p) % 4 == 0:
                out.append(cell)
    return out


def vp_count_on_unloading(layout: GridLayout, t: int) -> int:
    """VPs standing on unloading nodes at phase ``t``."""
    return sum(1 for c in vp_cells_at(layout, t) if layout.nodes[c] is NodeKind.UNLOADING)


def in_network_vp_count(layout: GridLayout) -> float:
    """VPs in the grid per cycle, averaged over the two drop-off phases."""
    return 0.5 * (vp_count_on_unloading(layout, 1) + vp_count_on_unloading(layout, 3))


def _station_for_exit(layout: GridLayout) -> dict[Cell, int]:
    """Active station a robot returns to after leaving at each exit cell.

    Exits of active stations map to that station; other exits map to the
    active station nearest along the loading-zone perimeter (ties to lowest id).
    """
    rows, cols = layout.n_rows, layout.n_cols
    perim = 2 * (rows + cols + 2)

    def arc(cell: Cell) -> int:
        r, c = cell
        if r == -1:
            return c + 1
        if c == cols:
            return (cols + 1) + r + 1
        if r == rows:
            return (cols + 1) + (rows + 1) + (cols - c)
        return 2 * (cols + 1) + (rows + 1) + (rows - r)

    own = layout.station_id_of_exit()
    st_arc = [arc(s.exit_cell) for s in layout.stations]
    out = {}
    for aisle in layout.aisles.values():
        cell = aisle.cells[-1]
        if cell in own:
            out[cell] = own[cell]
            continue
        a = arc(cell)
        dists = [min(abs(a - b), perim - abs(a - b)) for b in st_arc]
        out[cell] = int(np.argmin(dists))
    return out


def _build_path(layout: GridLayout, origin: int, segments: list[tuple[Aisle, int, int]],
                dest: int) -> FeasiblePath:
    """Trajectory and reserved slots for a route given as (aisle, from_pos, to_pos).

    The first segment starts at the entrance (-1); the last one ends at the
    exit boundary cell.  Between segments the robot turns at an intersection:
    arriving at phase ``t0`` it stays there until ``t0 + 2``, leaving on the
    crossing VP, which reaches the node two phases after the original one.
    """
    traj: list[tuple[Cell, int]] = []
    slots: set[tuple[Cell, int]] = set()
    t = -1
    for s, (aisle, p0, p1) in enumerate(segments):
        start = p0
        if s > 0:
            prev, _, prev_end = segments[s - 1]
            x_cell = aisle.cells[p0 + 1]
            t0 = t - 1  # arrival at the turning node on the previous VP
            traj.append((x_cell, t0 + 1))
            traj.append((x_cell, t0 + 2))
            slots.add((x_cell, t0 + 2))
            # the original VP stays blocked one phase past the node
            if prev_end + 2 < len(prev.cells):
                slots.add((prev.cells[prev_end + 2], t0 + 1))
            # the crossing VP is blocked for the two phases before it reaches the node
            for back, dt in ((2, t0), (1, t0 + 1)):
                if p0 - back >= -1:
                    slots.add((aisle.cells[p0 - back + 1], dt))
            t = t0 + 3
            start = p0 + 1
        for p in range(start, p1 + 1):
            cell = aisle.cells[p + 1]
            traj.append((cell, t))
            slots.add((cell, t))
            t += 1
    drops: dict[Cell, int] = {}
    for cell, dt in traj:
        for o in layout.outlets_adjacent(cell):
            drops.setdefault(o, dt)
    length = len(traj) - 1 - 2 * (len(segments) - 1)  # moves; the two holding phases per turn do not count
    return FeasiblePath(
        origin_station=origin,
        dest_station=dest,
        exit_cell=traj[-1][0],
        aisles=tuple(a.name for a, _, _ in segments),
        trajectory=tuple(traj),
        vp_steps=tuple(sorted(slots, key=lambda x: (x[1], x[0]))),
        drops=drops,
        turn_count=len(segments) - 1,
        length_cells=length,
    )


def _routes_from(layout: GridLayout, entrance_aisle: str, max_turns: int, exits: set[Cell]):
    """Yield routes as segment lists, each with at most ``max_turns`` left turns."""
    by_heading_at: dict[tuple[Cell, str], Aisle] = {}
    for a in layout.aisles.values():
        for cell in a.cells:
            by_heading_at[(cell, a.heading)] = a

    def walk(aisle: Aisle, p0: int, prefix: list, turns: int):
        last = len(aisle.cells) - 2  # position of the exit boundary cell
        if aisle.cells[-1] in exits:
            yield prefix + [(aisle, p0, last)]
        if turns == max_turns:
            return
        new_heading = LEFT_OF[aisle.heading]
        for p in range(p0 + 1, last):
            cell = aisle.cells[p + 1]
            if layout.nodes[cell] is not NodeKind.CONFLICT:
                continue
            other = by_heading_at.get((cell, new_heading))
            if other is None:
                continue
            yield from walk(other, other.position(cell), prefix + [(aisle, p0, p)], turns + 1)

    yield from walk(layout.aisles[entrance_aisle], -1, [], 0)


class PathFamily:
    """All feasible paths of a layout, indexed by (station, outlet).

    Paths of each station are kept in a list sorted by (turn count, length,
    cell sequence).  ``turn_slack`` optionally drops, per (station, outlet),
    paths using more than ``slack`` turns beyond the fewest possible.
    """

    def __init__(self, layout: GridLayout, max_turns: int = 3, exit_policy: str = "any",
                 turn_slack: int | None = None):
        if not 0 <= max_turns <= 3:
            raise ValueError("max_turns must lie in 0..3")
        self.layout = layout
        self.max_turns = max_turns
        self.exit_policy = exit_policy
        self.turn_slack = turn_slack
        exits = exit_cells(layout, exit_policy)
        dest_of = _station_for_exit(layout)
        self.paths: list[FeasiblePath] = []
        self.by_pair: dict[tuple[int, Cell], np.ndarray] = {}
        for sid, st in enumerate(layout.stations):
            routes = [
                _build_path(layout, sid, segs, dest_of[segs[-1][0].cells[-1]])
                for segs in _routes_from(layout, st.entrance_aisle, max_turns, exits)
            ]
            routes = [r for r in routes if r.drops]
            routes.sort(key=lambda r: (r.turn_count, r.length_cells, r.cells))
            base = len(self.paths)
            self.paths.extend(routes)
            pair: dict[Cell, list[int]] = {}
            for j, r in enumerate(routes):
                for o in r.drops:
                    pair.setdefault(o, []).append(base + j)
            for o, ids in pair.items():
                if turn_slack is not None:
                    fewest = min(self.paths[i].turn_count for i in ids)
                    ids = [i for i in ids if self.paths[i].turn_count <= fewest + turn_slack]
                self.by_pair[(sid, o)] = np.asarray(ids, dtype=np.int64)
        self._compile()

    def _compile(self):
        """Flat numpy views of every path's slots for vectorised lookups."""
        cid = self.layout.cell_index
        n = len(self.paths)
        self.slot_start = np.zeros(n + 1, dtype=np.int64)
        cells, dts = [], []
        for i, p in enumerate(self.paths):
            self.slot_start[i + 1] = self.slot_start[i] + len(p.vp_steps)
            cells.extend(cid[c] for c, _ in p.vp_steps)
            dts.extend(dt for _, dt in p.vp_steps)
        self.slot_cell = np.asarray(cells, dtype=np.int64)
        self.slot_dt = np.asarray(dts, dtype=np.int64)
        self.turns = np.asarray([p.turn_count for p in self.paths], dtype=np.int64)
        self.length = np.asarray([p.length_cells for p in self.paths], dtype=np.int64)
        self.duration = np.asarray([p.duration_phases for p in self.paths], dtype=np.int64)
        self.dest = np.asarray([p.dest_station for p in self.paths], dtype=np.int64)
        self.max_dt = int(self.slot_dt.max()) if n else 0
        self._gather_cache: dict[bytes, tuple] = {}
        self.cache_size = 4096

    def gather(self, path_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Concatenated slots of several paths plus the start offset of each path."""
        key = path_ids.tobytes()
        hit = self._gather_cache.get(key)
        if hit is None:
            starts = self.slot_start[path_ids]
            lens = self.slot_start[path_ids + 1] - starts
            offsets = np.r_[0, np.cumsum(lens)[:-1]]
            idx = np.repeat(starts - offsets, lens) + np.arange(lens.sum())
            hit = (self.slot_cell[idx], self.slot_dt[idx], offsets)
            if len(self._gather_cache) >= self.cache_size:
                self._gather_cache.pop(next(iter(self._gather_cache)))
            self._gather_cache[key] = hit
        return hit

    def __len__(self) -> int:
        return len(self.paths)

    def candidates(self, station: int, outlet: Cell) -> np.ndarray:
        """Path ids serving ``outlet`` from ``station``, best-first."""
        return self.by_pair.get((station, outlet), np.empty(0, dtype=np.int64))

    def slots_of(self, path_id: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.slot_start[path_id], self.slot_start[path_id + 1]
        return self.slot_cell[a:b], self.slot_dt[a:b]


def enumerate_feasible_paths(layout: GridLayout, max_turns: int = 3, exit_policy: str = "any",
                             turn_slack: int | None = None) -> PathFamily:
    return PathFamily(layout, max_turns, exit_policy, turn_slack)
