from __future__ import annotations

import numpy as np
import pytest

from oracles import time_expanded_arrival
from robosort.baseline import AgentTask, ObstacleTable, ca_star_assign, heading_between, sipp_plan
from robosort.network import build_layout, exit_cells
from robosort.sim import scan_positions


@pytest.fixture(scope="module")
def lay8():
    return build_layout(8, 8)


def _random_obstacles(lay, rng, n=15):
    cells = list(lay.nodes)
    obs, occ = ObstacleTable(), {}
    for _ in range(n):
        c = cells[int(rng.integers(len(cells)))]
        t0 = int(rng.integers(0, 30))
        for dt in range(int(rng.integers(1, 4))):
            occ.setdefault(c, set()).add(t0 + dt)
    for c, ts in occ.items():
        obs.add_path([(c, t) for t in ts])
    return obs, occ


def test_sipp_arrival_matches_time_expanded_search(lay8):
    rng = np.random.default_rng(0)
    cells = list(lay8.nodes)
    for _ in range(120):
        obs, occ = _random_obstacles(lay8, rng)
        st = lay8.stations[int(rng.integers(len(lay8.stations)))]
        hd = lay8.aisles[st.entrance_aisle].heading
        goal = {cells[int(rng.integers(len(cells)))]}
        plan = sipp_plan(lay8, st.entrance_cell, hd, goal, obs, 0, horizon=150)
        ref = time_expanded_arrival(lay8, st.entrance_cell, hd, goal, occ, 0, 150)
        assert (None if plan is None else plan[-1][1]) == ref


def test_sipp_path_is_safe_and_contiguous(lay8):
    rng = np.random.default_rng(3)
    obs, occ = _random_obstacles(lay8, rng, 25)
    st = lay8.stations[0]
    exits = exit_cells(lay8)
    plan = sipp_plan(lay8, st.entrance_cell, lay8.aisles[st.entrance_aisle].heading, exits, obs, 0)
    assert plan is not None and plan[-1][0] in exits
    for (a, ta), (b, tb) in zip(plan[:-1], plan[1:]):
        assert tb == ta + 1
        assert a == b or b in lay8.links[a]
    for c, t in plan:
        ts = occ.get(c, set())
        assert not ({t - 1, t, t + 1} & ts)


def test_via_cell_is_visited(lay8):
    st = lay8.stations[2]
    outlet = lay8.outlets[20]
    via = set(lay8.unloading_nodes_of(outlet))
    plan = sipp_plan(lay8, st.entrance_cell, lay8.aisles[st.entrance_aisle].heading, exit_cells(lay8),
                     ObstacleTable(), 0, via=via)
    assert via & {c for c, _ in plan}


def test_unreachable_within_horizon(lay8):
    obs = ObstacleTable()
    st = lay8.stations[0]
    (first,) = lay8.links[st.entrance_cell]
    obs.add_path([(first, t) for t in range(0, 500)])
    assert sipp_plan(lay8, st.entrance_cell, lay8.aisles[st.entrance_aisle].heading, exit_cells(lay8),
                     obs, 0, horizon=50) is None


def test_parked_robot_blocks_forever():
    obs = ObstacleTable()
    obs.park((2, 2), 10, robot=1)
    assert not obs.occupied((2, 2), 9)
    assert obs.occupied((2, 2), 10_000)
    assert obs.safe_intervals((2, 2), 0) == [(0, 9)]
    with pytest.raises(ValueError):
        obs.park((2, 2), 0, robot=2)
    obs.unpark((2, 2))
    assert not obs.occupied((2, 2), 10_000)


def test_prune_forgets_old_steps():
    obs = ObstacleTable()
    obs.add_path([((0, 0), t) for t in (1, 5, 9)])
    obs.prune(6)
    assert obs.occ[(0, 0)] == [9]


def test_prioritised_plans_are_conflict_free(lay8):
    rng = np.random.default_rng(5)
    tasks = []
    for i, st in enumerate(lay8.stations):
        tasks.append(AgentTask(i, i, lay8.outlets[int(rng.integers(len(lay8.outlets)))], st.entrance_cell,
                               lay8.aisles[st.entrance_aisle].heading, int(rng.integers(0, 4))))
    plans = ca_star_assign(lay8, tasks)
    assert all(p is not None for p in plans.values())
    cid = lay8.cell_index
    rows = [(r, t, cid[c]) for r, p in plans.items() for c, t in p]
    a, t, c = map(np.array, zip(*rows))
    assert scan_positions(a, t, c) == {"vertex": 0, "following": 0, "swapping": 0, "cycle": 0}


def test_heading_between():
    assert heading_between((1, 1), (0, 1)) == "N"
    with pytest.raises(ValueError):
        heading_between((0, 0), (2, 0))
