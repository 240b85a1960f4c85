"""Reservation table of VP slots, kept as a numpy ring buffer over phases."""
from __future__ import annotations

import csv
import io

import numpy as np

from .paths import PathFamily

FREE = -1


class ReservationConflict(RuntimeError):
    """Raised when a slot would be reserved twice; the run must abort."""


def abs_phase(entry_cycle: int, dt) -> np.ndarray | int:
    """Absolute phase of a path step: the robot stands on the entrance in the last phase of ``entry_cycle``."""
    return 4 * (entry_cycle + 1) + dt


class ReservationTable:
    """Owner of every (cell, phase) slot over a rolling window of ``window`` cycles.

    Row ``t % (4 * window)`` holds phase ``t``.  Phases older than the current
    cycle are wiped by :meth:`release_expired` before their rows are reused.
    """

    def __init__(self, n_cells: int, window: int = 64):
        self.window = window
        self.n_rows = 4 * window
        self.owner = np.full((self.n_rows, n_cells), FREE, dtype=np.int32)
        self.now = 0
        self._cleared_to = 0  # all phases below this are free and may be reused

    # -------------------------------------------------------------- queries
    def horizon_ok(self, n_t: int, max_dt: int) -> bool:
        """True if a path starting within ``n_t`` cycles of now fits inside the window."""
        return 4 * (n_t + 1) + max_dt < self.n_rows

    def is_free(self, cells: np.ndarray, phases: np.ndarray) -> np.ndarray:
        return self.owner[phases % self.n_rows, cells] == FREE

    def entry_cycle(self, family: PathFamily, path_id: int, now: int, n_t: int,
                    earliest: int | None = None) -> int | None:
        """Earliest cycle in ``[max(now, earliest), now + n_t)`` at which the path is free, else ``None``."""
        cells, dts = family.slots_of(path_id)
        start = now if earliest is None else max(now, earliest)
        for e in range(start, now + n_t):
            if self.is_free(cells, abs_phase(e, dts)).all():
                return e
        return None

    def first_free(self, family: PathFamily, path_ids: np.ndarray, now: int, n_t: int,
                   earliest: int | None = None) -> tuple[int, np.ndarray] | None:
        """Smallest entry cycle over several paths and the mask of paths free at that cycle."""
        if len(path_ids) == 0:
            return None
        cells, dts, seg = family.gather(path_ids)
        begin = now if earliest is None else max(now, earliest)
        for e in range(begin, now + n_t):
            busy = self.owner[abs_phase(e, dts) % self.n_rows, cells] != FREE
            blocked = np.logical_or.reduceat(busy, seg)
            if not blocked.all():
                return e, ~blocked
        return None

    def free_masks(self, family: PathFamily, path_ids: np.ndarray, now: int, n_t: int,
                   earliest: int | None = None):
        """Yield ``(entry cycle, free mask)`` for every cycle of the horizon with a free path."""
        if len(path_ids) == 0:
            return
        cells, dts, seg = family.gather(path_ids)
        begin = now if earliest is None else max(now, earliest)
        for e in range(begin, now + n_t):
            busy = self.owner[abs_phase(e, dts) % self.n_rows, cells] != FREE
            blocked = np.logical_or.reduceat(busy, seg)
            if not blocked.all():
                yield e, ~blocked

    # -------------------------------------------------------------- updates
    def reserve(self, family: PathFamily, path_id: int, entry: int, robot: int) -> None:
        cells, dts = family.slots_of(path_id)
        phases = abs_phase(entry, dts)
        if phases.min() < 4 * self.now or phases.max() >= self._cleared_to + self.n_rows:
            raise ReservationConflict("reservation outside the table window")
        rows = phases % self.n_rows
        if (self.owner[rows, cells] != FREE).any():
            raise ReservationConflict(f"robot {robot}: slot already reserved for path {path_id} at cycle {entry}")
        self.owner[rows, cells] = robot

    def release_expired(self, now: int) -> None:
        """Free every slot whose phase lies before cycle ``now``; those VPs have left the network."""
        target = 4 * now
        if target > self._cleared_to:
            lo = self._cleared_to
            if target - lo >= self.n_rows:
                self.owner[:] = FREE
            else:
                rows = np.arange(lo, target) % self.n_rows
                self.owner[rows] = FREE
            self._cleared_to = target
        self.now = now

    def n_reserved(self) -> int:
        return int((self.owner != FREE).sum())

    def snapshot(self) -> list[tuple[int, int, int, int]]:
        """Reserved slots as (cycle, cell id, phase-in-cycle, robot), sorted."""
        rows, cells = np.nonzero(self.owner != FREE)
        base = self._cleared_to
        # undo the ring: phase t is the unique t >= base with t % n_rows == row
        phases = base + (rows - base) % self.n_rows
        out = sorted(zip((phases // 4).tolist(), cells.tolist(), (phases % 4).tolist(),
                         self.owner[rows, cells].tolist()))
        return out

    def to_csv(self, layout=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cycle", "cell", "phase", "robot"])
        for cycle, cell, phase, robot in self.snapshot():
            label = cell if layout is None else "%d:%d" % layout.cell_of_id(cell)
            w.writerow([cycle, label, "abcd"[phase], robot])
        return buf.getvalue()
