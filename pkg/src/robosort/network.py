"""Directed one-way grid network of a robotic sorting zone.

Cells are indexed ``(row, col)`` with row 0 at the top.  Inside the sorting
area the cell grid has ``2*n_h - 1`` rows and ``2*n_v - 1`` columns:

* even rows are horizontal aisles, even columns are vertical aisles;
* ``(even, even)`` cells are conflict nodes (aisle intersections);
* ``(odd, odd)`` cells are outlets;
* the remaining aisle cells are unloading nodes.

A ring of boundary cells just outside the grid (row ``-1``, row ``2*n_h - 1``,
column ``-1``, column ``2*n_v - 1``) holds the aisle ends, which serve as station
entrances or exits.

Aisle parity: even horizontal aisles flow west (right to left), odd ones east;
even vertical aisles flow south (top to bottom), odd ones north.  With this
parity the perimeter circulates counterclockwise and every outlet can be reached
from every station with left turns only.
"""
from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

Cell = tuple[int, int]


class NodeKind(str, enum.Enum):
    CONFLICT = "C"
    UNLOADING = "U"
    ENTRANCE = "E"
    EXIT = "X"


class Side(str, enum.Enum):
    TOP = "top"
    RIGHT = "right"
    BOTTOM = "bottom"
    LEFT = "left"


# unit step (d_row, d_col) per heading
HEADINGS: dict[str, Cell] = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}
# the heading obtained after a left turn
LEFT_OF = {"N": "W", "W": "S", "S": "E", "E": "N"}

SIDE_ORDER = (Side.TOP, Side.RIGHT, Side.BOTTOM, Side.LEFT)


@dataclass(frozen=True)
class Aisle:
    """One-way aisle; ``cells`` runs in travel order from the entry end to the exit end."""

    axis: str  # "H" or "V"
    index: int
    heading: str
    cells: tuple[Cell, ...]

    @property
    def name(self) -> str:
        return f"{self.axis}{self.index}"

    def position(self, cell: Cell) -> int:
        """Position along the aisle; the entry boundary cell is -1."""
        return self.cells.index(cell) - 1


@dataclass(frozen=True)
class StationSite:
    side: Side
    index_along_side: int
    entrance_cell: Cell
    exit_cell: Cell
    entrance_aisle: str
    exit_aisle: str
    active: bool = True


@dataclass(frozen=True)
class GridLayout:
    n_h: int
    n_v: int
    cell_len_D: float
    sites: tuple[StationSite, ...]
    aisles: dict[str, Aisle] = field(repr=False)

    # ------------------------------------------------------------------ geometry
    @property
    def n_rows(self) -> int:
        return 2 * self.n_h - 1

    @property
    def n_cols(self) -> int:
        return 2 * self.n_v - 1

    @property
    def stations(self) -> list[StationSite]:
        """Active station sites in canonical order."""
        return [s for s in self.sites if s.active]

    @cached_property
    def outlets(self) -> list[Cell]:
        return [(r, c) for r in range(1, self.n_rows, 2) for c in range(1, self.n_cols, 2)]

    @cached_property
    def nodes(self) -> dict[Cell, NodeKind]:
        out: dict[Cell, NodeKind] = {}
        for aisle in self.aisles.values():
            for cell in aisle.cells[1:-1]:
                r, c = cell
                out[cell] = NodeKind.CONFLICT if (r % 2 == 0 and c % 2 == 0) else NodeKind.UNLOADING
            out[aisle.cells[0]] = NodeKind.ENTRANCE
            out[aisle.cells[-1]] = NodeKind.EXIT
        return out

    @cached_property
    def links(self) -> dict[Cell, tuple[Cell, ...]]:
        succ: dict[Cell, list[Cell]] = {}
        for aisle in self.aisles.values():
            for a, b in zip(aisle.cells[:-1], aisle.cells[1:]):
                succ.setdefault(a, []).append(b)
        return {k: tuple(sorted(v)) for k, v in succ.items()}

    @cached_property
    def aisles_through(self) -> dict[Cell, tuple[str, ...]]:
        """Aisle names passing through each network cell (two at conflict nodes)."""
        out: dict[Cell, list[str]] = {}
        for name, aisle in self.aisles.items():
            for cell in aisle.cells:
                out.setdefault(cell, []).append(name)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def cell_index(self) -> dict[Cell, int]:
        """Dense integer id for every cell of the padded grid (network cells and outlets)."""
        width = self.n_cols + 2
        return {
            (r, c): (r + 1) * width + (c + 1)
            for r in range(-1, self.n_rows + 1)
            for c in range(-1, self.n_cols + 1)
        }

    @property
    def n_cell_ids(self) -> int:
        return (self.n_rows + 2) * (self.n_cols + 2)

    def cell_of_id(self, idx: int) -> Cell:
        width = self.n_cols + 2
        return (idx // width - 1, idx % width - 1)

    def unloading_nodes_of(self, outlet: Cell) -> list[Cell]:
        r, c = outlet
        return [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]

    def outlets_adjacent(self, cell: Cell) -> list[Cell]:
        """Outlets served from an unloading node (one or two)."""
        r, c = cell
        if self.nodes.get(cell) is not NodeKind.UNLOADING:
            return []
        if r % 2 == 0:  # on a horizontal aisle, outlets above and below
            cand = [(r - 1, c), (r + 1, c)]
        else:
            cand = [(r, c - 1), (r, c + 1)]
        return [o for o in cand if 0 < o[0] < self.n_rows and 0 < o[1] < self.n_cols]

    def station_id_of_exit(self) -> dict[Cell, int]:
        return {s.exit_cell: i for i, s in enumerate(self.stations)}

    # ------------------------------------------------------------- serialization
    def to_text(self) -> str:
        """Deterministic JSON document: dims, cell table of node kinds, station list."""
        rows = []
        for r in range(-1, self.n_rows + 1):
            line = []
            for c in range(-1, self.n_cols + 1):
                kind = self.nodes.get((r, c))
                if kind is not None:
                    line.append(kind.value)
                elif 0 <= r < self.n_rows and 0 <= c < self.n_cols:
                    line.append("O")
                else:
                    line.append(".")
            rows.append("".join(line))
        doc = {
            "format": "robosort-layout/1",
            "dims": {"n_h": self.n_h, "n_v": self.n_v, "cell_len_D": self.cell_len_D},
            "cells": rows,
            "aisles": {
                name: {"heading": a.heading, "from": list(a.cells[0]), "to": list(a.cells[-1])}
                for name, a in sorted(self.aisles.items())
            },
            "stations": [
                {
                    "side": s.side.value,
                    "index": s.index_along_side,
                    "entrance": list(s.entrance_cell),
                    "exit": list(s.exit_cell),
                    "active": s.active,
                }
                for s in self.sites
            ],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_text(cls, text: str) -> GridLayout:
        doc = json.loads(text)
        dims = doc["dims"]
        active = [s for s in doc["stations"] if s["active"]]
        layout = build_layout(dims["n_h"], dims["n_v"], dims["cell_len_D"], len(active))
        wanted = {(s["side"], s["index"]) for s in active}
        sites = tuple(
            StationSite(
                s.side, s.index_along_side, s.entrance_cell, s.exit_cell,
                s.entrance_aisle, s.exit_aisle, (s.side.value, s.index_along_side) in wanted,
            )
            for s in layout.sites
        )
        return cls(layout.n_h, layout.n_v, layout.cell_len_D, sites, layout.aisles)


def _build_aisles(n_h: int, n_v: int) -> dict[str, Aisle]:
    n_rows, n_cols = 2 * n_h - 1, 2 * n_v - 1
    aisles: dict[str, Aisle] = {}
    for h in range(n_h):
        r = 2 * h
        cols = list(range(-1, n_cols + 1))
        heading = "E"
        if h % 2 == 0:
            cols.reverse()
            heading = "W"
        aisles[f"H{h}"] = Aisle("H", h, heading, tuple((r, c) for c in cols))
    for v in range(n_v):
        c = 2 * v
        rows = list(range(-1, n_rows + 1))
        heading = "S"
        if v % 2 == 1:
            rows.reverse()
            heading = "N"
        aisles[f"V{v}"] = Aisle("V", v, heading, tuple((r, c) for r in rows))
    return aisles


def _all_sites(n_h: int, n_v: int, aisles: dict[str, Aisle]) -> dict[Side, list[StationSite]]:
    """Every potential station per side, ordered along the side (left to right / top to bottom)."""

    def site(side: Side, m: int, ent: str, ext: str) -> StationSite:
        return StationSite(side, m, aisles[ent].cells[0], aisles[ext].cells[-1], ent, ext)

    return {
        # top: south-flowing even column enters, the next (north-flowing) column exits
        Side.TOP: [site(Side.TOP, m, f"V{2*m}", f"V{2*m+1}") for m in range(n_v // 2)],
        # right: west-flowing even row enters, the next (east-flowing) row exits
        Side.RIGHT: [site(Side.RIGHT, m, f"H{2*m}", f"H{2*m+1}") for m in range(n_h // 2)],
        # bottom: north-flowing odd column enters, its west neighbour exits
        Side.BOTTOM: [site(Side.BOTTOM, m, f"V{2*m+1}", f"V{2*m}") for m in range(n_v // 2)],
        # left: east-flowing odd row enters, the row above exits
        Side.LEFT: [site(Side.LEFT, m, f"H{2*m+1}", f"H{2*m}") for m in range(n_h // 2)],
    }


def allocate_stations(capacities: list[int], n_stations: int) -> list[int]:
    """Largest-remainder split of ``n_stations`` proportional to ``capacities``.

    Ties on the remainder go to the earlier side.
    """
    total = sum(capacities)
    quotas = [n_stations * c / total for c in capacities]
    counts = [int(q) for q in quotas]
    left = n_stations - sum(counts)
    order = sorted(range(len(capacities)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order:
        if left == 0:
            break
        if counts[i] < capacities[i]:
            counts[i] += 1
            left -= 1
    return counts


def build_layout(n_h: int, n_v: int, cell_len: float = 1.0, n_stations: int | None = None) -> GridLayout:
    """Build the directed aisle network with ``n_stations`` active stations.

    Stations are spread over the four sides proportionally to how many aisle
    ends each side offers and centred on each side.
    """
    for name, n in (("n_h", n_h), ("n_v", n_v)):
        if int(n) != n or n < 4 or n % 2:
            raise ValueError(f"{name} must be an even integer >= 4, got {n}")
    if cell_len <= 0:
        raise ValueError("cell_len must be positive")
    if n_stations is None:
        n_stations = n_h + n_v
    if not 1 <= n_stations <= n_h + n_v:
        raise ValueError(f"n_stations must lie in [1, {n_h + n_v}], got {n_stations}")

    aisles = _build_aisles(n_h, n_v)
    per_side = _all_sites(n_h, n_v, aisles)
    counts = allocate_stations([len(per_side[s]) for s in SIDE_ORDER], n_stations)
    sites: list[StationSite] = []
    for side, k in zip(SIDE_ORDER, counts):
        cap = len(per_side[side])
        start = (cap - k) // 2
        for m, s in enumerate(per_side[side]):
            sites.append(StationSite(s.side, s.index_along_side, s.entrance_cell, s.exit_cell,
                                     s.entrance_aisle, s.exit_aisle, start <= m < start + k))
    return GridLayout(n_h, n_v, float(cell_len), tuple(sites), aisles)


def left_turn_successors(layout: GridLayout, cell: Cell, heading: str) -> list[tuple[Cell, str, int]]:
    """Moves from ``cell`` while travelling ``heading``: straight, or a left turn at a conflict node."""
    out = []
    for nxt in layout.links.get(cell, ()):
        step = (nxt[0] - cell[0], nxt[1] - cell[1])
        if step == HEADINGS[heading]:
            out.append((nxt, heading, 0))
        elif step == HEADINGS[LEFT_OF[heading]]:
            out.append((nxt, LEFT_OF[heading], 1))
    return out


def exit_cells(layout: GridLayout, exit_policy: str = "any") -> set[Cell]:
    """Cells where a delivery route may leave the network.

    ``"any"`` allows every aisle end (robots leaving at an unstaffed site walk
    back along the loading zone); ``"active"`` only allows exits of staffed stations.
    """
    if exit_policy == "any":
        return {a.cells[-1] for a in layout.aisles.values()}
    if exit_policy == "active":
        return set(layout.station_id_of_exit())
    raise ValueError(f"unknown exit policy {exit_policy!r}")


def classify_reachability(layout: GridLayout, max_turns: int, exit_policy: str = "any") -> dict[Cell, set[int]]:
    """Map each outlet to the active stations that can serve it within ``max_turns`` left turns.

    A station serves an outlet if some route from its entrance passes an
    unloading node of the outlet and then reaches an allowed exit.
    """
    exits = exit_cells(layout, exit_policy)
    outlets = layout.outlets
    reach: dict[Cell, set[int]] = {o: set() for o in outlets}

    # backward pass: for each (cell, heading) the fewest turns needed to reach an active exit
    to_exit = _turns_to_exit(layout, exits)

    for sid, st in enumerate(layout.stations):
        start_heading = layout.aisles[st.entrance_aisle].heading
        best = {(st.entrance_cell, start_heading): 0}
        queue = deque([(st.entrance_cell, start_heading)])
        # 0-1 BFS on turns
        while queue:
            cell, hd = queue.popleft()
            t = best[(cell, hd)]
            for o in layout.outlets_adjacent(cell):
                rem = to_exit.get((cell, hd))
                if rem is not None and t + rem <= max_turns:
                    reach[o].add(sid)
            for nxt, nhd, cost in left_turn_successors(layout, cell, hd):
                nt = t + cost
                if nt > max_turns or best.get((nxt, nhd), max_turns + 1) <= nt:
                    continue
                best[(nxt, nhd)] = nt
                if cost:
                    queue.append((nxt, nhd))
                else:
                    queue.appendleft((nxt, nhd))
    return reach


def _turns_to_exit(layout: GridLayout, exits: set[Cell]) -> dict[tuple[Cell, str], int]:
    pred: dict[tuple[Cell, str], list[tuple[tuple[Cell, str], int]]] = {}
    states = set()
    for cell in layout.nodes:
        for hd in {layout.aisles[a].heading for a in layout.aisles_through[cell]}:
            states.add((cell, hd))
    for cell, hd in states:
        for nxt, nhd, cost in left_turn_successors(layout, cell, hd):
            pred.setdefault((nxt, nhd), []).append(((cell, hd), cost))
    dist: dict[tuple[Cell, str], int] = {}
    queue = deque()
    for cell in exits:
        hd = layout.aisles[layout.aisles_through[cell][0]].heading
        dist[(cell, hd)] = 0
        queue.append((cell, hd))
    while queue:
        s = queue.popleft()
        for p, cost in pred.get(s, ()):
            nd = dist[s] + cost
            if nd < dist.get(p, 1 << 30):
                dist[p] = nd
                if cost:
                    queue.append(p)
                else:
                    queue.appendleft(p)
    return dist
