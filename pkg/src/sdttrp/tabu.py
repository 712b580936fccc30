"""Corridor-controlled relocate search.

The search walks through infeasible space: a move may leave some routes over
capacity or push the number of soft-window violations above the budget, as
long as both stay inside the current corridor, and it may worsen the cost by
less than the corridor's per-move allowance.  The corridor widens after a
run of failed steps and narrows after a run of successful ones.  From time to
time the working solution is sent through the recovery pipeline and the
repaired result competes for the incumbent.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Deque, List, NamedTuple, Optional, Tuple

import numpy as np

from .evaluate import (
    RouteEval,
    deletion_cost,
    evaluate_route,
    insert_visit,
    movable_positions,
    probe_insertion,
    remove_visit,
    solution_feasibility,
)
from .model import ProblemInstance, Route, Solution
from .recovery import RecoveryFailed, recovery_pipeline
from .rng import make_rng


@dataclass(frozen=True)
class CorridorState:
    max_excess_delays: int = 1
    max_overcap_routes: int = 1
    max_cost_increase: float = 0.0

    def __post_init__(self):
        if self.max_excess_delays < 0 or self.max_overcap_routes < 0 or self.max_cost_increase < 0:
            raise ValueError("corridor allowances must be non-negative")


@dataclass(frozen=True)
class TabuParams:
    closeness: float = 3600.0          # seconds of travel to a neighbour of the slot
    initial_corridor: Optional[CorridorState] = None   # None: derive from the initial solution
    feasibility_period: int = 25       # applied moves between recovery runs
    stall_limit: int = 1500
    step_limit: int = 5000
    widen_after: int = 5               # consecutive failures before widening
    narrow_after: int = 3              # consecutive successes before narrowing
    growth: float = 2.0
    shrink: float = 0.5
    # ceiling for max_cost_increase as a multiple of its initial value
    cost_increase_ceiling: float = 16.0
    tabu_tenure: int = 3
    seed: int = 0
    adopt_recovered: bool = True       # recovered solution also replaces the working one
    time_limit: Optional[float] = None # wall-clock seconds, checked between steps

    def __post_init__(self):
        if not self.closeness > 0:
            raise ValueError("closeness must be positive")
        if self.stall_limit <= 0 or self.step_limit < 0:
            raise ValueError("stall_limit must be positive and step_limit non-negative")


@dataclass
class SearchState:
    rng: np.random.Generator
    soft_budget: int = 0
    iteration: int = 0
    successes_in_row: int = 0
    failures_in_row: int = 0
    iterations_since_best: int = 0
    applied_moves: int = 0
    moves_since_recovery: int = 0
    feasibility_period: int = 25
    current_overcap_routes: int = 0
    current_soft_violations: int = 0
    n_routes: int = 0
    last_success: bool = False
    recent: Deque[Tuple[int, int, int]] = field(default_factory=deque)  # (customer, from vehicle, iteration)


class Move(NamedTuple):
    iteration: int
    customer: int
    from_vehicle: int
    to_vehicle: int
    slot: int
    cost: int


class WorkingSolution:
    """Mutable routes plus their evaluations and corridor counters."""

    def __init__(self, inst: ProblemInstance, sol: Solution):
        self.inst = inst
        self.routes: List[Route] = list(sol.routes)
        self.evals: List[RouteEval] = [evaluate_route(inst, r) for r in self.routes]

    @property
    def cost(self) -> int:
        return sum(e.cost for e in self.evals)

    @property
    def soft_violations(self) -> int:
        return sum(e.soft_violations for e in self.evals)

    @property
    def overcap_routes(self) -> int:
        return sum(1 for e in self.evals if e.capacity_excess > 0)

    def solution(self) -> Solution:
        return Solution(tuple(self.routes))


def find_places_for_insertion(inst: ProblemInstance, route: Route, customer: int,
                              closeness: float, ev: Optional[RouteEval] = None) -> List[int]:
    """Slots with a neighbour (or the depot) within ``closeness`` seconds of the customer."""
    if ev is None:
        ev = evaluate_route(inst, route)
    T = inst.tables.times(inst.vehicles[route.vehicle].speed)
    cn = inst.customer_node(customer)
    row = T[cn]
    nodes = ev.nodes
    L = len(nodes)
    out = []
    for p in range(L + 1):
        a = nodes[p - 1] if p > 0 else 0
        b = nodes[p] if p < L else 0
        if row[a] <= closeness or row[b] <= closeness:
            out.append(p)
    return out


def allow_move(cost: float, corridor: CorridorState) -> bool:
    return cost < 0 or cost < corridor.max_cost_increase


def heuristic_step(inst: ProblemInstance, work: WorkingSolution, corridor: CorridorState,
                   closeness: float, state: SearchState, tenure: int = 3) -> Optional[Move]:
    """Relocate one randomly chosen visit to its best corridor-feasible slot.

    Returns the applied move, or ``None`` when nothing was applied.
    """
    routes, evals = work.routes, work.evals
    if len(routes) < 2:
        return None
    picks = [(r, j) for r, route in enumerate(routes) for j in movable_positions(route)]
    if not picks:
        return None
    r_i, j = picks[int(state.rng.integers(len(picks)))]
    route_i, ev_i = routes[r_i], evals[r_i]
    stop = route_i.stops[j]
    c, amount = stop.customer, stop.delivered
    allowed = inst.customers[c].allowed_vehicles

    d_cost = deletion_cost(inst, route_i, j, ev_i)
    reduced = remove_visit(route_i, j)
    red_ev = evaluate_route(inst, reduced) if reduced is not None else None
    base_soft = state.current_soft_violations - ev_i.soft_violations
    base_over = state.current_overcap_routes - (ev_i.capacity_excess > 0)
    if red_ev is not None:
        base_soft += red_ev.soft_violations
        base_over += red_ev.capacity_excess > 0
    soft_limit = state.soft_budget + corridor.max_excess_delays
    over_limit = corridor.max_overcap_routes

    forbidden = {v for cust, v, it in state.recent
                 if cust == c and state.iteration - it <= tenure}

    best = None
    for r, route in enumerate(routes):
        if r == r_i or route.vehicle not in allowed or route.vehicle in forbidden:
            continue
        if c in route.customers:
            continue
        ev = evals[r]
        cap = inst.vehicles[route.vehicle].total_capacity
        soft_other = base_soft - ev.soft_violations
        over_other = base_over - (ev.capacity_excess > 0)
        for p in find_places_for_insertion(inst, route, c, closeness, ev):
            pr = probe_insertion(inst, route, c, amount, p, ev)
            if pr is None:
                continue
            if soft_other + pr.soft_violations > soft_limit:
                continue
            if over_other + (pr.load > cap) > over_limit:
                continue
            cost = d_cost + pr.delta_cost
            if best is None or cost < best[0]:
                best = (cost, r, p)

    if best is None or not allow_move(best[0], corridor):
        return None
    cost, r, p = best
    target = routes[r]
    routes[r] = insert_visit(target, c, amount, p)
    evals[r] = evaluate_route(inst, routes[r])
    if reduced is None:
        del routes[r_i]
        del evals[r_i]
    else:
        routes[r_i] = reduced
        evals[r_i] = red_ev
    state.recent.append((c, route_i.vehicle, state.iteration))
    while state.recent and state.iteration - state.recent[0][2] > tenure:
        state.recent.popleft()
    change_current_violations(state, work)
    return Move(state.iteration, c, route_i.vehicle, target.vehicle, p, cost)


def change_current_violations(state: SearchState, work: WorkingSolution) -> None:
    state.current_soft_violations = work.soft_violations
    state.current_overcap_routes = work.overcap_routes
    state.n_routes = len(work.routes)


def record_step(state: SearchState, success: bool) -> None:
    state.iteration += 1
    state.iterations_since_best += 1
    state.last_success = success
    if success:
        state.successes_in_row += 1
        state.failures_in_row = 0
        state.applied_moves += 1
        state.moves_since_recovery += 1
    else:
        state.failures_in_row += 1
        state.successes_in_row = 0


def change_corridor(corridor: CorridorState, state: SearchState, params: TabuParams,
                    ceiling: Optional[float] = None) -> CorridorState:
    """Widen after ``widen_after`` failures in a row, narrow after ``narrow_after`` successes."""
    if state.failures_in_row >= params.widen_after:
        cost = corridor.max_cost_increase * params.growth
        if ceiling is not None:
            cost = min(cost, ceiling)
        return CorridorState(
            max_excess_delays=min(state.soft_budget, corridor.max_excess_delays + 1),
            max_overcap_routes=min(state.n_routes // 2, corridor.max_overcap_routes + 1),
            max_cost_increase=cost,
        )
    if state.successes_in_row >= params.narrow_after:
        return CorridorState(
            max_excess_delays=max(0, corridor.max_excess_delays - 1),
            max_overcap_routes=max(0, corridor.max_overcap_routes - 1),
            max_cost_increase=corridor.max_cost_increase * params.shrink,
        )
    return corridor


def stopping_condition(state: SearchState, params: TabuParams) -> bool:
    return state.iteration >= params.step_limit or state.iterations_since_best >= params.stall_limit


def default_corridor(inst: ProblemInstance, sol: Solution) -> CorridorState:
    """Half the average arc cost as per-move allowance; one unit of each infeasibility."""
    evals = [evaluate_route(inst, r) for r in sol.routes]
    travel = sum(e.cost - inst.vehicles[r.vehicle].fixed_cost for r, e in zip(sol.routes, evals))
    arcs = sum(len(e.nodes) + 1 for e in evals)
    return CorridorState(
        max_excess_delays=min(1, inst.soft_violation_budget),
        max_overcap_routes=min(1, len(sol.routes) // 2),
        max_cost_increase=0.5 * travel / max(1, arcs),
    )


def _reset_departures(sol: Solution) -> Solution:
    return Solution(tuple(Route(r.vehicle, r.stops) for r in sol.routes), sol.unserved)


@dataclass
class TabuResult:
    best: Solution
    best_cost: int
    initial_cost: int
    iterations: int
    applied_moves: int
    recoveries: int
    failed_recoveries: int
    moves: List[Move]


def should_obtain_feasible(state: SearchState, work: WorkingSolution, best_cost: int) -> bool:
    if state.moves_since_recovery >= state.feasibility_period:
        return True
    return (state.last_success and state.current_overcap_routes == 0
            and state.current_soft_violations <= state.soft_budget
            and work.cost < best_cost)


def run(inst: ProblemInstance, initial: Solution, params: TabuParams = TabuParams()) -> TabuResult:
    """Improve ``initial``; the returned incumbent is feasible and never costlier."""
    started = time.monotonic()
    work = WorkingSolution(inst, initial)
    best = initial
    best_cost = work.cost
    initial_cost = best_cost
    corridor = params.initial_corridor or default_corridor(inst, initial)
    ceiling = max(corridor.max_cost_increase, 1.0) * params.cost_increase_ceiling
    state = SearchState(
        rng=make_rng(params.seed),
        soft_budget=inst.soft_violation_budget,
        feasibility_period=params.feasibility_period,
    )
    change_current_violations(state, work)
    moves: List[Move] = []
    recoveries = failed = 0
    pipeline_rng = make_rng(params.seed + 1)

    while not stopping_condition(state, params):
        if params.time_limit is not None and time.monotonic() - started >= params.time_limit:
            break
        move = heuristic_step(inst, work, corridor, params.closeness, state, params.tabu_tenure)
        record_step(state, move is not None)
        if move is not None:
            moves.append(move)
        if should_obtain_feasible(state, work, best_cost):
            state.moves_since_recovery = 0
            recoveries += 1
            try:
                repaired = recovery_pipeline(inst, work.solution(), pipeline_rng)
            except RecoveryFailed:
                failed += 1
                repaired = None
            if repaired is not None:
                cost = sum(evaluate_route(inst, r).cost for r in repaired.routes)
                if cost < best_cost:
                    best, best_cost = repaired, cost
                    state.iterations_since_best = 0
                if params.adopt_recovered:
                    work = WorkingSolution(inst, _reset_departures(repaired))
                    change_current_violations(state, work)
        new = change_corridor(corridor, state, params, ceiling)
        if new != corridor:
            if state.failures_in_row >= params.widen_after:
                state.failures_in_row = 0
            else:
                state.successes_in_row = 0
            corridor = new

    return TabuResult(best, best_cost, initial_cost, state.iteration, state.applied_moves,
                      recoveries, failed, moves)


def improve(inst: ProblemInstance, initial: Solution, params: TabuParams = TabuParams()) -> Solution:
    return run(inst, initial, params).best
