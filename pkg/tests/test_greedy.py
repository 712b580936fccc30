import copy
import math

import numpy as np
import pytest

from sdttrp.evaluate import evaluate_route, insertion_cost, solution_cost
from sdttrp.greedy import (
    GreedyParams,
    GreedyState,
    NoVehicle,
    basic_route,
    build_initial_solution,
    choose_vehicle,
    draw_violation_allowance,
    insert_loop,
    maybe_allow_split,
)
from sdttrp.io import dumps, solution_to_dict
from sdttrp.model import Route, Vehicle, split_count, validate_solution, visit
from support import ScriptedRng, brute_force_optimum, customer, generated, make_instance


def budget_state(w=0, v=0, splits_left=0, split_budget=0, unserved=10, n=10):
    return GreedyState(
        unserved=[[i, 1] for i in range(unserved)],
        remaining_soft_budget=w,
        remaining_split_budget=splits_left,
        vehicle_remaining={},
        n_customers=n,
        soft_violation_budget=v,
        split_budget=split_budget,
    )


# --- build_initial_solution ----------------------------------------------------

def test_single_customer_single_vehicle():
    inst = make_instance([customer(0, 1500, 800)], [Vehicle(0, 50)])
    sol = build_initial_solution(inst, GreedyParams())
    assert len(sol.routes) == 1 and sol.routes[0].customers == [0]
    assert validate_solution(inst, sol) == []


def test_two_compatible_customers_share_a_route():
    cs = [customer(0, 1000, 0, allowed=(0, 1)), customer(1, 1000, 400, allowed=(0, 1))]
    inst = make_instance(cs, [Vehicle(0, 50, 0, 500, 1.0), Vehicle(1, 50, 0, 500, 1.0)])
    sol = build_initial_solution(inst, GreedyParams())
    assert len(sol.routes) == 1
    singles = sum(evaluate_route(inst, Route(0, (visit(i, 10),))).cost for i in range(2))
    cost = solution_cost(inst, sol)
    assert cost <= singles
    assert cost == brute_force_optimum(inst)


def test_customer_without_a_usable_vehicle_is_left_unserved():
    # truck-only, only a trailer vehicle allowed, nowhere to park it
    cs = [customer(0, 1000, 0, allowed=(0,)), customer(1, 2000, 0, truck_only=True, allowed=(1,))]
    inst = make_instance(cs, [Vehicle(0, 50), Vehicle(1, 50, 50)])
    sol = build_initial_solution(inst, GreedyParams())
    assert sol.fleet_exhausted and sol.unserved == ((1, 10),)


def test_exhausted_fleet_reports_the_stranded_customer():
    cs = [customer(0, 20000, 0, window=(0, 2100, 2100)), customer(1, -20000, 0, window=(0, 2100, 2100))]
    inst = make_instance(cs, [Vehicle(0, 50, speed=10)])
    sol = build_initial_solution(inst, GreedyParams(mu=1))
    assert len(sol.routes) == 1
    assert len(sol.unserved) == 1 and sol.unserved[0][1] == 10


def test_generated_solutions_respect_every_rule():
    complete = 0
    for seed in range(150):
        inst = generated(seed, n=5 + seed % 40)
        sol = build_initial_solution(inst, GreedyParams(rng_seed=seed))
        for route in sol.routes:
            ev = evaluate_route(inst, route)
            assert ev.hard_feasible and ev.segments_fit
        assert split_count(sol) <= inst.split_budget
        assert sum(evaluate_route(inst, r).soft_violations for r in sol.routes) <= inst.soft_violation_budget
        if not sol.unserved:
            complete += 1
            assert validate_solution(inst, sol) == []
    assert complete > 120


def test_construction_is_deterministic():
    inst = generated(4, n=25)
    a = build_initial_solution(inst, GreedyParams(rng_seed=99))
    b = build_initial_solution(inst, GreedyParams(rng_seed=99))
    assert a == b
    assert dumps(solution_to_dict(inst, a)) == dumps(solution_to_dict(inst, b))


def test_mu_must_be_positive():
    with pytest.raises(ValueError):
        GreedyParams(mu=0)


# --- choose_vehicle -------------------------------------------------------------

def test_cheapest_fixed_cost_wins():
    inst = make_instance([customer(0, 10, 0, allowed=(0, 1))], [Vehicle(0, 50, 0, 200), Vehicle(1, 50, 0, 100)])
    assert choose_vehicle(inst, GreedyState.initial(inst), 0) == 1


def test_equal_cost_prefers_larger_capacity():
    inst = make_instance([customer(0, 10, 0, demand=5, allowed=(0, 1))],
                         [Vehicle(0, 10, 0, 100), Vehicle(1, 20, 0, 100)])
    assert choose_vehicle(inst, GreedyState.initial(inst), 0) == 1


def test_vehicle_able_to_carry_the_demand_beats_a_cheaper_small_one():
    inst = make_instance([customer(0, 10, 0, demand=30, allowed=(0, 1))],
                         [Vehicle(0, 20, 0, 50), Vehicle(1, 40, 0, 100)])
    assert choose_vehicle(inst, GreedyState.initial(inst), 0) == 1


def test_no_vehicle_when_allowed_set_is_used_up():
    inst = make_instance([customer(0, 10, 0, allowed=(0,))], [Vehicle(0, 50), Vehicle(1, 50)])
    state = GreedyState.initial(inst)
    state.used.add(0)
    with pytest.raises(NoVehicle):
        choose_vehicle(inst, state, 0)


# --- randomised budgets ---------------------------------------------------------------

def test_zero_budget_means_zero_allowance():
    assert draw_violation_allowance(budget_state(w=0, v=4), ScriptedRng([0.0] * 10)) == 0


def test_full_ratio_runs_to_the_cap():
    state = budget_state(w=3, v=3, unserved=10, n=10)      # est 3, r = 1
    assert draw_violation_allowance(state, np.random.default_rng(0)) == 3


def test_allowance_hand_trace():
    state = budget_state(w=3, v=6, unserved=10, n=10)      # est 6, r = 0.5
    rng = ScriptedRng([0.31, 0.77, 0.05])
    assert draw_violation_allowance(state, rng) == 1
    assert rng.used == 2


def test_allowance_distribution_is_geometric():
    state = budget_state(w=3, v=6, unserved=10, n=10)
    rng = np.random.default_rng(2024)
    draws = np.array([draw_violation_allowance(state, rng) for _ in range(10000)])
    r = 0.5
    for a in range(3):
        assert abs(np.mean(draws == a) - r ** a * (1 - r)) <= 0.02
    assert abs(np.mean(draws == 3) - r ** 3) <= 0.02


def test_no_split_when_budget_spent():
    state = budget_state(splits_left=0, split_budget=3)
    rng = np.random.default_rng(1)
    assert not any(maybe_allow_split(state, rng) for _ in range(1000))


def test_split_always_allowed_at_full_ratio():
    state = budget_state(splits_left=2, split_budget=2, unserved=10, n=10)
    rng = np.random.default_rng(1)
    assert all(maybe_allow_split(state, rng) for _ in range(1000))


def test_split_frequency_matches_ratio():
    state = budget_state(splits_left=1, split_budget=4, unserved=10, n=10)   # est 4, p = 0.25
    rng = np.random.default_rng(7)
    freq = np.mean([maybe_allow_split(state, rng) for _ in range(10000)])
    assert abs(freq - 0.25) <= 0.02


# --- insert_loop ------------------------------------------------------------------

def test_route_closes_when_nobody_else_fits_the_vehicle():
    cs = [customer(0, 1000, 0, allowed=(0,)), customer(1, 1100, 0, allowed=(1,))]
    inst = make_instance(cs, [Vehicle(0, 50), Vehicle(1, 50)])
    state = GreedyState.initial(inst)
    state.unserved = [[1, 10]]
    route = insert_loop(inst, state, Route(0, (visit(0, 10),)), 0, False)
    assert route.customers == [0]
    assert 0 in state.used and state.unserved == [[1, 10]]


def test_cheaper_insertion_goes_first():
    # customer 1 sits 50 m off the line, customer 2 is 100 m off it
    cs = [customer(0, 1000, 0, demand=10), customer(1, 500, 50, demand=10), customer(2, 600, 100, demand=10)]
    inst = make_instance(cs, [Vehicle(0, 20)])
    state = GreedyState.initial(inst)
    state.unserved = [[1, 10], [2, 10]]
    d1 = insertion_cost(inst, Route(0, (visit(0, 10),)), 1, 10, 0, False, 0).delta_cost
    d2 = insertion_cost(inst, Route(0, (visit(0, 10),)), 2, 10, 0, False, 0).delta_cost
    assert d1 < d2
    route = insert_loop(inst, state, Route(0, (visit(0, 10),)), 0, False)
    assert sorted(route.customers) == [0, 1]


def _replay(inst, route, unserved, allowance):
    """Insertion loop re-derived from insertion_cost alone (no splits, no parking)."""
    veh = inst.vehicles[route.vehicle]
    unserved = [list(u) for u in unserved]
    while True:
        best_viol = best_clear = None
        load = route.load
        for j, q in unserved:
            if route.vehicle not in inst.customers[j].allowed_vehicles or load + q > veh.total_capacity:
                continue
            for p in range(len(route.stops) + 1):
                v = insertion_cost(inst, route, j, q, p, True, allowance)
                if v is not None and (best_viol is None or v.delta_cost < best_viol[0]):
                    best_viol = (v.delta_cost, j, q, p)
                c = insertion_cost(inst, route, j, q, p, False, allowance)
                if c is not None and (best_clear is None or c.delta_cost < best_clear[0]):
                    best_clear = (c.delta_cost, j, q, p)
        if best_viol is None and best_clear is None:
            return route
        options = [x for x in (best_clear, best_viol) if x is not None]
        delta, j, q, p = min(options, key=lambda x: x[0])   # min keeps the clear one on ties
        stops = route.stops[:p] + (visit(j, q),) + route.stops[p:]
        route = Route(route.vehicle, stops)
        unserved = [u for u in unserved if u[0] != j]


def test_insert_loop_matches_trace_replay():
    for seed in range(60):
        inst = generated(seed, n=5, truck_only_fraction=0.0, split_budget=0, n_vehicles=3,
                         soft_violation_budget=1 + seed % 3)
        state = GreedyState.initial(inst)
        order = sorted(range(inst.n), key=lambda i: (-math.hypot(
            inst.customers[i].location.x - inst.depot.x, inst.customers[i].location.y - inst.depot.y), i))
        assert [u[0] for u in state.unserved] == order
        seed_c = order[0]
        k = min(inst.customers[seed_c].allowed_vehicles)
        start = basic_route(inst, k, seed_c, inst.customers[seed_c].demand)
        if start is None:
            continue
        state.unserved = [[c, inst.customers[c].demand] for c in order[1:]]
        allowance = seed % 3
        if evaluate_route(inst, start).soft_violations > allowance:
            continue
        expected = _replay(inst, start, copy.deepcopy(state.unserved), allowance)
        got = insert_loop(inst, state, start, allowance, False)
        assert got == expected
