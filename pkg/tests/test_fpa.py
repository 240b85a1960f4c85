from __future__ import annotations

import numpy as np
import pytest

from oracles import fpa_brute_force
from robosort.fpa import (
    FpaInstance,
    build_instance,
    heuristic_gap,
    heuristic_solve,
    objective,
    random_instance,
    solve_fpa_exact,
    violations,
)
from robosort.network import build_layout
from robosort.rcs.paths import PathFamily


@pytest.fixture(scope="module")
def lay4():
    return build_layout(4, 4)


@pytest.fixture(scope="module")
def fam4(lay4):
    return PathFamily(lay4)


def test_same_station_demands_contend_for_the_entrance(lay4, fam4):
    o = lay4.outlets[4]
    inst = build_instance(lay4, fam4, [(0, o), (0, o)])
    sol = solve_fpa_exact(inst)
    cheapest = min(opt.cost for opt in inst.demands[0].options)
    assert sol.served == 1
    # the waiting robot pays its cheapest cost plus one cycle
    assert sol.objective == pytest.approx(2 * cheapest + 2.0)
    assert heuristic_solve(inst).objective == pytest.approx(sol.objective)


def test_free_grid_serves_everyone_at_cheapest_cost(lay4, fam4):
    demands = [(s, lay4.outlets[s]) for s in range(0, len(lay4.stations), 3)]
    inst = build_instance(lay4, fam4, demands)
    sol = solve_fpa_exact(inst)
    h = heuristic_solve(inst)
    assert not violations(inst, sol.choice)
    assert h.objective >= sol.objective - 1e-9


# penalty None is the default (cheapest cost plus one cycle); 500 dwarfs every path cost
@pytest.mark.parametrize("penalty", [None, 500.0])
@pytest.mark.parametrize("background", [0, 4])
def test_exact_matches_enumeration(lay4, fam4, background, penalty):
    rng = np.random.default_rng(background)
    for _ in range(25):
        inst = random_instance(lay4, fam4, rng, int(rng.integers(1, 5)), background=background,
                               delay_penalty=penalty)
        sol = solve_fpa_exact(inst)
        assert not violations(inst, sol.choice)
        assert sol.objective == pytest.approx(fpa_brute_force(inst))


def test_heuristic_is_feasible_and_never_better(lay4, fam4):
    rng = np.random.default_rng(21)
    for _ in range(40):
        inst = random_instance(lay4, fam4, rng, int(rng.integers(2, 9)), background=3)
        h = heuristic_solve(inst)
        ex = solve_fpa_exact(inst)
        assert not violations(inst, h.choice)
        assert h.objective >= ex.objective - 1e-9
        assert heuristic_gap(inst, h, ex) >= 1.0 - 1e-12


def test_balance_slack_is_respected(lay4, fam4):
    rng = np.random.default_rng(8)
    for _ in range(15):
        inst = random_instance(lay4, fam4, rng, 6, balance_slack=1)
        for sol in (solve_fpa_exact(inst), heuristic_solve(inst)):
            assert not violations(inst, sol.choice)


def test_violations_detect_shared_slots(lay4, fam4):
    o = lay4.outlets[0]
    inst = build_instance(lay4, fam4, [(0, o), (0, o)])
    msgs = violations(inst, [0, 0])
    assert any("share slot" in m for m in msgs)
    assert violations(inst, [0]) == ["one decision per demand required"]
    assert violations(inst, [7_000, -1])


def test_blocked_slots_force_waiting(lay4, fam4):
    o = lay4.outlets[0]
    free = build_instance(lay4, fam4, [(0, o)])
    blocked = set().union(*(opt.slots for opt in free.demands[0].options))
    inst = build_instance(lay4, fam4, [(0, o)], blocked=blocked)
    sol = solve_fpa_exact(inst)
    assert sol.choice == [-1]
    assert sol.objective == inst.demands[0].delay_penalty


def test_objective_counts_penalties(lay4, fam4):
    inst = build_instance(lay4, fam4, [(1, lay4.outlets[2])], delay_penalty=50.0)
    assert objective(inst, [-1]) == 50.0
    assert objective(inst, [0]) == inst.demands[0].options[0].cost


def test_text_round_trip(lay4, fam4):
    inst = random_instance(lay4, fam4, np.random.default_rng(1), 6, 4)
    text = inst.to_text()
    back = FpaInstance.from_text(text)
    assert back.to_text() == text
    assert solve_fpa_exact(back).objective == solve_fpa_exact(inst).objective


def test_frozen_objectives(lay4, fam4, golden):
    rng = np.random.default_rng(11)
    exact, heur = [], []
    for _ in range(len(golden["fpa"]["exact"])):
        inst = random_instance(lay4, fam4, rng, int(rng.integers(2, 9)), background=3)
        exact.append(solve_fpa_exact(inst).objective)
        heur.append(heuristic_solve(inst).objective)
    assert exact == golden["fpa"]["exact"]
    assert heur == golden["fpa"]["heuristic"]


def test_node_limit(lay4, fam4):
    inst = random_instance(lay4, fam4, np.random.default_rng(2), 8)
    with pytest.raises(RuntimeError):
        solve_fpa_exact(inst, node_limit=3)
