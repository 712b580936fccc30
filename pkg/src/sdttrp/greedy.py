"""Randomised greedy construction of an initial solution.

Routes are built one at a time.  Each route starts from one of the ``mu``
customers farthest from the depot, gets the cheapest suitable unused
vehicle, a randomly drawn soft-violation allowance and possibly the right to
make one partial (split) delivery, and then grows by repeatedly applying the
cheapest feasible insertion over all unserved customers until nothing fits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from .evaluate import (
    RouteEval,
    evaluate_route,
    insert_visit,
    probe_insertion,
    slot_segment,
)
from .model import (
    ATTACH,
    ProblemInstance,
    Route,
    Solution,
    StopKind,
    park_at_customer,
    park_at_transshipment,
    visit,
)
from .rng import RouteStreams


class NoVehicle(Exception):
    """No unused vehicle may serve the customer."""


@dataclass(frozen=True)
class GreedyParams:
    mu: int = 3
    rng_seed: int = 0
    # Re-arm the soft-violation budget for every route instead of once.
    reset_budget_per_route: bool = False

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("mu must be at least 1")


@dataclass
class GreedyState:
    unserved: List[List[int]]          # [customer, remaining demand], farthest first
    remaining_soft_budget: int
    remaining_split_budget: int
    vehicle_remaining: Dict[int, int]  # vehicle -> remaining capacity (0 once used)
    used: Set[int] = field(default_factory=set)
    n_customers: int = 0
    soft_violation_budget: int = 0
    split_budget: int = 0

    @classmethod
    def initial(cls, inst: ProblemInstance) -> "GreedyState":
        order = sorted(
            range(inst.n),
            key=lambda i: (-_depot_distance(inst, i), i),
        )
        return cls(
            unserved=[[i, inst.customers[i].demand] for i in order],
            remaining_soft_budget=inst.soft_violation_budget,
            remaining_split_budget=inst.split_budget,
            vehicle_remaining={v.id: v.total_capacity for v in inst.vehicles},
            n_customers=inst.n,
            soft_violation_budget=inst.soft_violation_budget,
            split_budget=inst.split_budget,
        )

    def remaining(self, customer: int) -> int:
        for c, q in self.unserved:
            if c == customer:
                return q
        return 0


def _depot_distance(inst: ProblemInstance, i: int) -> float:
    loc = inst.customers[i].location
    return math.hypot(loc.x - inst.depot.x, loc.y - inst.depot.y)


# ---------------------------------------------------------------------------
# vehicle choice and basic routes

def _can_host(inst: ProblemInstance, vehicle: int, customer: int) -> bool:
    veh = inst.vehicles[vehicle]
    if inst.customers[customer].truck_only and veh.has_trailer:
        return bool(inst.transshipments)
    return True


def vehicle_preference(inst: ProblemInstance, state: GreedyState, customer: int) -> List[int]:
    """Unused vehicles able to serve ``customer``, best first.

    Vehicles that can carry ``min(q_i, largest available capacity)`` come
    first, cheapest fixed cost first, then larger capacity, then lower id.
    """
    pool = [k for k in sorted(inst.customers[customer].allowed_vehicles)
            if k not in state.used and _can_host(inst, k, customer)]
    if not pool:
        return []
    q = state.remaining(customer) or inst.customers[customer].demand
    need = min(q, max(inst.vehicles[k].total_capacity for k in pool))
    fits = [k for k in pool if inst.vehicles[k].total_capacity >= need]
    rest = [k for k in pool if inst.vehicles[k].total_capacity < need]
    fits.sort(key=lambda k: (inst.vehicles[k].fixed_cost, -inst.vehicles[k].total_capacity, k))
    rest.sort(key=lambda k: (-inst.vehicles[k].total_capacity, inst.vehicles[k].fixed_cost, k))
    return fits + rest


def choose_vehicle(inst: ProblemInstance, state: GreedyState, seed_customer: int) -> int:
    pref = vehicle_preference(inst, state, seed_customer)
    if not pref:
        raise NoVehicle(seed_customer)
    return pref[0]


def basic_route(inst: ProblemInstance, vehicle: int, customer: int, amount: int) -> Optional[Route]:
    """Single-customer route, parking the trailer first when the customer is truck-only.

    Returns ``None`` when no time-feasible variant exists.
    """
    veh = inst.vehicles[vehicle]
    cust = inst.customers[customer]
    if not (cust.truck_only and veh.has_trailer):
        route = Route(vehicle, (visit(customer, amount),))
        return route if evaluate_route(inst, route).time_feasible else None
    if amount > veh.truck_capacity:
        return None
    D = inst.tables.dist
    cn = inst.customer_node(customer)
    order = sorted(
        range(len(inst.transshipments)),
        key=lambda t: (D[0][inst.transshipment_node(t)] + 2 * D[inst.transshipment_node(t)][cn]
                       + D[inst.transshipment_node(t)][0], t),
    )
    for t in order:
        route = Route(vehicle, (park_at_transshipment(t), visit(customer, amount), ATTACH))
        if evaluate_route(inst, route).time_feasible:
            return route
    return None


# ---------------------------------------------------------------------------
# randomised budgets

def _estimate(budget: int, state: GreedyState) -> int:
    n = max(1, state.n_customers)
    return max(1, round(budget * len(state.unserved) / n))


def draw_violation_allowance(state: GreedyState, rng: np.random.Generator) -> int:
    """Soft violations the next route may use.

    The acceptance ratio ``r = min(1, w / est)`` compares the remaining
    budget ``w`` with the share expected for the customers still unserved;
    the allowance grows by one for every consecutive draw below ``r``.
    """
    w = state.remaining_soft_budget
    r = min(1.0, w / _estimate(state.soft_violation_budget, state))
    a = 0
    while a < w:
        if rng.random() < r:
            a += 1
        else:
            break
    return a


def maybe_allow_split(state: GreedyState, rng: np.random.Generator) -> bool:
    p = min(1.0, state.remaining_split_budget / _estimate(state.split_budget, state))
    return bool(rng.random() < p)


# ---------------------------------------------------------------------------
# insertion loop

@dataclass
class _Candidate:
    delta: int
    customer: int
    amount: int
    position: int = -1              # slot for a plain insertion
    route: Optional[Route] = None   # prebuilt route when a parked segment is opened

    def apply(self, route: Route) -> Route:
        if self.route is not None:
            return self.route
        return insert_visit(route, self.customer, self.amount, self.position)


def _new_segment_routes(inst: ProblemInstance, route: Route, ev: RouteEval,
                        customer: int, amount: int) -> List[Route]:
    """Variants of ``route`` serving a truck-only customer from a new parked segment.

    For every slot outside existing segments the trailer is left either at the
    preceding trailer-customer or at the transshipment point adding the least
    distance.
    """
    veh = inst.vehicles[route.vehicle]
    if amount > veh.truck_capacity:
        return []
    D = inst.tables.dist
    cn = inst.customer_node(customer)
    stops = route.stops
    nodes = ev.nodes
    out = []
    for p in range(len(stops) + 1):
        if slot_segment(ev, route, p) >= 0:
            continue
        if p < len(stops) and stops[p].kind is StopKind.PARK:
            continue
        a = nodes[p - 1] if p > 0 else 0
        b = nodes[p] if p < len(stops) else 0
        prev = stops[p - 1] if p > 0 else None
        if (prev is not None and prev.kind is StopKind.VISIT
                and not inst.customers[prev.customer].truck_only):
            seg = (park_at_customer(prev.customer), visit(customer, amount), ATTACH)
            out.append(Route(route.vehicle, stops[:p] + seg + stops[p:], route.departure))
        if inst.transshipments:
            def added(t):
                tn = inst.transshipment_node(t)
                return D[a][tn] + D[tn][cn] + D[cn][tn] + D[tn][b] - D[a][b]
            t = min(range(len(inst.transshipments)), key=lambda t: (added(t), t))
            seg = (park_at_transshipment(t), visit(customer, amount), ATTACH)
            out.append(Route(route.vehicle, stops[:p] + seg + stops[p:], route.departure))
    return out


def insert_loop(inst: ProblemInstance, state: GreedyState, route: Route, viol_allowance: int,
                split_enabled: bool, rng: Optional[np.random.Generator] = None) -> Route:
    """Grow ``route`` with cheapest insertions until none is feasible, then close it.

    Each round compares the best insertion that may add soft violations (up
    to ``viol_allowance`` on the route) with the best one that adds none, and
    applies the cheaper; ties go to the violation-free one.
    """
    k = route.vehicle
    veh = inst.vehicles[k]
    split_used = False
    ev = evaluate_route(inst, route)
    while True:
        in_route = set(route.customers)
        room = veh.total_capacity - ev.load
        best_viol: Optional[_Candidate] = None
        best_clear: Optional[_Candidate] = None
        for j, q in state.unserved:
            cust = inst.customers[j]
            if k not in cust.allowed_vehicles or j in in_route:
                continue
            if q <= room:
                amount = q
            elif split_enabled and not split_used and room > 0 and state.remaining_split_budget > 0:
                amount = room
            else:
                continue
            for p in range(len(route.stops) + 1):
                pr = probe_insertion(inst, route, j, amount, p, ev)
                if pr is None or pr.soft_violations > viol_allowance:
                    continue
                if best_viol is None or pr.delta_cost < best_viol.delta:
                    best_viol = _Candidate(pr.delta_cost, j, amount, position=p)
                if pr.soft_violations == ev.soft_violations:
                    if best_clear is None or pr.delta_cost < best_clear.delta:
                        best_clear = _Candidate(pr.delta_cost, j, amount, position=p)
            if cust.truck_only and veh.has_trailer:
                for cand in _new_segment_routes(inst, route, ev, j, amount):
                    e2 = evaluate_route(inst, cand)
                    if not e2.time_feasible or not e2.segments_fit or e2.soft_violations > viol_allowance:
                        continue
                    delta = e2.cost - ev.cost
                    if best_viol is None or delta < best_viol.delta:
                        best_viol = _Candidate(delta, j, amount, route=cand)
                    if e2.soft_violations == ev.soft_violations:
                        if best_clear is None or delta < best_clear.delta:
                            best_clear = _Candidate(delta, j, amount, route=cand)

        if best_viol is None and best_clear is None:
            state.vehicle_remaining[k] = 0
            state.used.add(k)
            state.remaining_soft_budget -= ev.soft_violations
            return route
        if best_clear is None:
            chosen = best_viol
        elif best_viol is None:
            chosen = best_clear
        else:
            chosen = best_viol if best_viol.delta < best_clear.delta else best_clear

        partial = chosen.amount < state.remaining(chosen.customer)
        route = chosen.apply(route)
        ev = evaluate_route(inst, route)
        _serve(state, chosen.customer, chosen.amount)
        if partial:
            split_used = True
            state.remaining_split_budget -= 1
        state.vehicle_remaining[k] = veh.total_capacity - ev.load


def _serve(state: GreedyState, customer: int, amount: int) -> None:
    for idx, (c, q) in enumerate(state.unserved):
        if c == customer:
            if q - amount > 0:
                state.unserved[idx][1] = q - amount
            else:
                del state.unserved[idx]
            return
    raise KeyError(customer)


# ---------------------------------------------------------------------------
# driver

def build_initial_solution(inst: ProblemInstance, params: GreedyParams = GreedyParams()) -> Solution:
    """Serve every customer, or as many as the fleet allows.

    Customers that cannot be given a route (no suitable unused vehicle left)
    are reported in ``Solution.unserved`` with their outstanding demand.
    """
    state = GreedyState.initial(inst)
    streams = RouteStreams(params.rng_seed)
    routes: List[Route] = []
    stranded: Dict[int, int] = {}
    while state.unserved:
        rng = streams.next()
        if params.reset_budget_per_route:
            state.remaining_soft_budget = inst.soft_violation_budget
        top = min(params.mu, len(state.unserved))
        i, q = state.unserved[int(rng.integers(top))]

        allowance = draw_violation_allowance(state, rng)
        split_enabled = maybe_allow_split(state, rng)

        route = None
        for k in vehicle_preference(inst, state, i):
            veh = inst.vehicles[k]
            amount = min(q, veh.total_capacity)
            if amount < q and state.remaining_split_budget <= 0:
                continue
            candidate = basic_route(inst, k, i, amount)
            if candidate is None:
                continue
            late = evaluate_route(inst, candidate).soft_violations
            if late > state.remaining_soft_budget:
                continue
            route = candidate
            allowance = max(allowance, late)
            break
        if route is None:
            stranded[i] = q
            _serve(state, i, q)
            continue

        amount = route.load
        _serve(state, i, amount)
        seed_split = amount < q
        if seed_split:
            state.remaining_split_budget -= 1
        route = insert_loop(inst, state, route, allowance, split_enabled and not seed_split, rng)
        routes.append(route)

    return Solution(tuple(routes), tuple(sorted(stranded.items())))
