"""Per-cycle path assignment heuristic of the rhythmic controller."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..network import Cell, GridLayout
from .kinematics import RcsParams
from .paths import PathFamily
from .reservation import ReservationTable, abs_phase


@dataclass
class RcsConfig:
    n_t: int = 16  # search horizon, cycles
    n_p: int = 64  # reservation window, cycles
    max_turns: int = 3
    turn_slack: int | None = None
    exit_policy: str = "any"
    balance_destinations: bool = False
    # "entry": smallest entry cycle, ties to fewest turns then shortest;
    # "completion": smallest entry wait plus travel time
    selection: str = "entry"

    def __post_init__(self):
        if self.selection not in ("entry", "completion"):
            raise ValueError(f"unknown selection rule {self.selection!r}")


@dataclass
class Candidate:
    robot: int
    station: int
    outlet: Cell
    waiting: float  # s


@dataclass(frozen=True)
class Assignment:
    robot: int
    station: int
    outlet: Cell
    path_id: int
    entry: int  # cycle
    drop_phase: int  # absolute phase of the drop-off
    exit_phase: int  # absolute phase on the exit cell


@dataclass
class StepResult:
    assignments: list[Assignment] = field(default_factory=list)
    waiting: list[Candidate] = field(default_factory=list)


class RcsController:
    """Reservation-based controller: one call to :meth:`step` per cycle."""

    def __init__(self, layout: GridLayout, params: RcsParams, cfg: RcsConfig | None = None,
                 family: PathFamily | None = None):
        self.layout = layout
        self.params = params
        self.cfg = cfg or RcsConfig()
        self.family = family or PathFamily(layout, self.cfg.max_turns, self.cfg.exit_policy,
                                           self.cfg.turn_slack)
        self.table = ReservationTable(layout.n_cell_ids, self.cfg.n_p)
        if not self.table.horizon_ok(self.cfg.n_t, self.family.max_dt):
            raise ValueError("reservation window too short for the search horizon and longest path")
        n_st = len(layout.stations)
        self.last_entry = np.full(n_st, -1, dtype=np.int64)
        # robots heading to each station (and queued there), used to spread returns
        self.dest_load = np.zeros(n_st, dtype=np.int64)

    def choose(self, cand: Candidate, now: int) -> tuple[int, int] | None:
        """Best (path id, entry cycle) for a candidate, or ``None`` if nothing fits in the horizon."""
        ids = self.family.candidates(cand.station, cand.outlet)
        if len(ids) == 0:
            raise ValueError(f"no feasible path from station {cand.station} to outlet {cand.outlet}")
        if self.cfg.selection == "completion":
            return self._choose_completion(ids, now, int(self.last_entry[cand.station]) + 1)
        found = self.table.first_free(self.family, ids, now, self.cfg.n_t,
                                      earliest=int(self.last_entry[cand.station]) + 1)
        if found is None:
            return None
        entry, free = found
        ok = ids[free]
        if self.cfg.balance_destinations and len(ok) > 1:
            fam = self.family
            # fewest turns first, then the least loaded destination, then shortest
            order = np.lexsort((np.arange(len(ok)), fam.length[ok], self.dest_load[fam.dest[ok]],
                                fam.turns[ok]))
            return int(ok[order[0]]), entry
        return int(ok[0]), entry

    def _choose_completion(self, ids: np.ndarray, now: int, earliest: int) -> tuple[int, int] | None:
        fam = self.family
        dur = fam.duration[ids]
        shortest = int(dur.min())
        best = None
        for entry, free in self.table.free_masks(fam, ids, now, self.cfg.n_t, earliest):
            if best is not None and 4 * entry + shortest >= best[0]:
                break
            ok = ids[free]
            # candidates are sorted by turns then length; argmin keeps the first of equals
            j = int(np.argmin(4 * entry + fam.duration[ok]))
            key = 4 * entry + int(fam.duration[ok[j]])
            if best is None or key < best[0]:
                best = (key, int(ok[j]), entry)
        return None if best is None else (best[1], best[2])

    def step(self, now: int, candidates: list[Candidate]) -> StepResult:
        """Serve candidates in decreasing waiting time (ties: station id, robot id)."""
        self.table.release_expired(now)
        res = StepResult()
        for cand in sorted(candidates, key=lambda c: (-c.waiting, c.station, c.robot)):
            pick = self.choose(cand, now)
            if pick is None:
                cand.waiting += self.params.tau_c
                res.waiting.append(cand)
                continue
            pid, entry = pick
            self.table.reserve(self.family, pid, entry, cand.robot)
            self.last_entry[cand.station] = entry
            path = self.family.paths[pid]
            self.dest_load[cand.station] -= 1
            self.dest_load[path.dest_station] += 1
            res.assignments.append(Assignment(
                cand.robot, cand.station, cand.outlet, pid, entry,
                int(abs_phase(entry, path.drops[cand.outlet])),
                int(abs_phase(entry, path.duration_phases)),
            ))
        return res


def rcs_cycle_step(controller: RcsController, now: int, candidates: list[Candidate]) -> StepResult:
    return controller.step(now, candidates)
