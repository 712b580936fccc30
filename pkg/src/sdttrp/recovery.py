"""Feasibility restoration for solutions left infeasible by the corridor search.

The pipeline runs four stages in order: intra-route optimisation (relocate
and 2-opt), capacity recovery, departure-time compaction, and soft-window
recovery.
"""
from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .evaluate import (
    RouteEval,
    deletion_cost,
    evaluate_route,
    insert_visit,
    is_anchor,
    is_feasible,
    movable_positions,
    probe_insertion,
    remove_visit,
    route_nodes,
    route_structure_ok,
)
from .greedy import basic_route
from .model import ProblemInstance, Route, Solution, StopKind
from .rng import make_rng


class RecoveryFailed(Exception):
    """The pipeline could not reach a feasible solution.

    ``solution`` holds the partially repaired solution.
    """

    def __init__(self, message: str, solution: Optional[Solution] = None):
        super().__init__(message)
        self.solution = solution


class FleetExhausted(RecoveryFailed):
    """A new route was needed but every suitable vehicle is in use."""


def cv_set(inst: ProblemInstance, sol: Solution) -> Set[int]:
    """Indices of routes carrying more than their vehicle's total capacity."""
    return {r for r, route in enumerate(sol.routes) if evaluate_route(inst, route).capacity_excess > 0}


# ---------------------------------------------------------------------------
# stage 1: intra-route optimisation

def _distance(D, nodes: Sequence[int]) -> int:
    prev = 0
    total = 0
    for node in nodes:
        total += D[prev][node]
        prev = node
    return total + D[prev][0]


def _intra_candidates(inst: ProblemInstance, route: Route, ev: RouteEval):
    """Yield ``(distance change, candidate stops)`` for relocate and 2-opt moves."""
    D = inst.tables.dist
    stops = route.stops
    nodes = ev.nodes
    L = len(stops)
    out = []
    # relocate one visit elsewhere in the route
    for j in movable_positions(route):
        reduced = remove_visit(route, j)
        if reduced is None or len(reduced.stops) != L - 1:
            continue
        red_nodes = nodes[:j] + nodes[j + 1:]
        cn = nodes[j]
        a = nodes[j - 1] if j > 0 else 0
        b = nodes[j + 1] if j + 1 < L else 0
        gain = D[a][cn] + D[cn][b] - D[a][b]
        for p in range(L):
            if p == j:
                continue
            a2 = red_nodes[p - 1] if p > 0 else 0
            b2 = red_nodes[p] if p < L - 1 else 0
            delta = D[a2][cn] + D[cn][b2] - D[a2][b2] - gain
            if delta < 0:
                new = reduced.stops[:p] + (stops[j],) + reduced.stops[p:]
                out.append((delta, new))
    # reverse a run of consecutive visits
    for i in range(L):
        if stops[i].kind is not StopKind.VISIT:
            continue
        a = nodes[i - 1] if i > 0 else 0
        for j in range(i + 1, L):
            if stops[j].kind is not StopKind.VISIT:
                break
            if is_anchor(route, j):
                break
            b = nodes[j + 1] if j + 1 < L else 0
            delta = D[a][nodes[j]] + D[nodes[i]][b] - D[a][nodes[i]] - D[nodes[j]][b]
            if delta < 0:
                new = stops[:i] + tuple(reversed(stops[i:j + 1])) + stops[j + 1:]
                out.append((delta, new))
    return out


def optimize_route(inst: ProblemInstance, route: Route) -> Route:
    """Best-improvement relocate/2-opt descent on one route.

    A move is taken only if it shortens the route without breaking a time
    window that held before or adding soft violations.
    """
    ev = evaluate_route(inst, route)
    while True:
        cands = _intra_candidates(inst, route, ev)
        cands.sort(key=lambda c: c[0])
        moved = False
        for _, stops in cands:
            cand = Route(route.vehicle, stops, route.departure)
            if not route_structure_ok(inst, cand):
                continue
            e2 = evaluate_route(inst, cand)
            if ev.time_feasible and not e2.time_feasible:
                continue
            if e2.soft_violations > ev.soft_violations or not e2.segments_fit:
                continue
            if e2.distance >= ev.distance:
                continue
            route, ev = cand, e2
            moved = True
            break
        if not moved:
            return route


def routes_optimization(inst: ProblemInstance, sol: Solution) -> Solution:
    return Solution(tuple(optimize_route(inst, r) for r in sol.routes), sol.unserved)


# ---------------------------------------------------------------------------
# stage 2: capacity

def _unused_vehicles(inst: ProblemInstance, routes: Iterable[Route]) -> List[int]:
    used = {r.vehicle for r in routes}
    return [v.id for v in inst.vehicles if v.id not in used]


def _new_route_for(inst: ProblemInstance, routes: Sequence[Route], customer: int,
                   amount: int, soft_free: bool = False) -> Optional[Tuple[int, Route]]:
    """Cheapest single-visit route on an unused allowed vehicle, as ``(cost, route)``."""
    best = None
    allowed = inst.customers[customer].allowed_vehicles
    for k in _unused_vehicles(inst, routes):
        if k not in allowed or inst.vehicles[k].total_capacity < amount:
            continue
        route = basic_route(inst, k, customer, amount)
        if route is None:
            continue
        ev = evaluate_route(inst, route)
        if soft_free and ev.soft_violations:
            continue
        if best is None or ev.cost < best[0]:
            best = (ev.cost, route)
    return best


def _best_relocation(inst: ProblemInstance, routes: List[Route], evals: List[RouteEval],
                     src: int, targets: Iterable[int]):
    """Cheapest capacity-feasible move of a visit out of route ``src``.

    Moves that add no soft violations are preferred over cheaper ones that do.
    Returns ``(key, position, target, slot)`` or ``None``.
    """
    route = routes[src]
    ev = evals[src]
    best = None
    targets = list(targets)
    for j in movable_positions(route):
        stop = route.stops[j]
        c = stop.customer
        allowed = inst.customers[c].allowed_vehicles
        d_cost = deletion_cost(inst, route, j, ev)
        for t in targets:
            tgt = routes[t]
            if tgt.vehicle not in allowed or c in tgt.customers:
                continue
            tev = evals[t]
            cap = inst.vehicles[tgt.vehicle].total_capacity
            for p in range(len(tgt.stops) + 1):
                pr = probe_insertion(inst, tgt, c, stop.delivered, p, tev)
                if pr is None or pr.load > cap:
                    continue
                key = (pr.soft_violations > tev.soft_violations, d_cost + pr.delta_cost)
                if best is None or key < best[0]:
                    best = (key, j, t, p)
    return best


def _apply_relocation(inst, routes, evals, src, j, tgt, p):
    stop = routes[src].stops[j]
    routes[tgt] = insert_visit(routes[tgt], stop.customer, stop.delivered, p)
    evals[tgt] = evaluate_route(inst, routes[tgt])
    reduced = remove_visit(routes[src], j)
    if reduced is None:
        del routes[src]
        del evals[src]
    else:
        routes[src] = reduced
        evals[src] = evaluate_route(inst, reduced)


def recover_capacity_violations(inst: ProblemInstance, sol: Solution,
                                rng: Optional[np.random.Generator] = None) -> Solution:
    """Bring every route within its vehicle's total capacity.

    First visits are relocated from over-capacity routes into routes with
    room; whatever is left over is split off into new single-customer routes
    on unused vehicles.  Raises ``FleetExhausted`` if that runs out of
    vehicles.
    """
    if rng is None:
        rng = make_rng(0)
    routes = list(sol.routes)
    evals = [evaluate_route(inst, r) for r in routes]

    def over() -> List[int]:
        return [r for r, e in enumerate(evals) if e.capacity_excess > 0]

    # phase 1: relocate into routes with room
    for vehicle in [routes[r].vehicle for r in over()]:
        while True:
            src = next((r for r, rt in enumerate(routes) if rt.vehicle == vehicle), None)
            if src is None or evals[src].capacity_excess == 0:
                break
            bad = set(over())
            targets = [t for t in range(len(routes)) if t not in bad]
            move = _best_relocation(inst, routes, evals, src, targets)
            if move is None:
                break
            _, j, t, p = move
            _apply_relocation(inst, routes, evals, src, j, t, p)

    # phase 2: new routes for customers taken out of over-capacity routes
    while True:
        bad = over()
        if not bad:
            break
        src = bad[int(rng.integers(len(bad)))]
        route = routes[src]
        ev = evals[src]
        options = []
        for j in movable_positions(route):
            stop = route.stops[j]
            fresh = _new_route_for(inst, routes, stop.customer, stop.delivered)
            if fresh is None:
                continue
            relief = min(stop.delivered, ev.capacity_excess)
            increase = deletion_cost(inst, route, j, ev) + fresh[0]
            options.append((-relief, increase, j, fresh[1]))
        if not options:
            raise FleetExhausted(
                f"no unused vehicle can take a customer from route on vehicle {route.vehicle}",
                Solution(tuple(routes), sol.unserved),
            )
        _, _, j, fresh = min(options, key=lambda o: o[:3])
        reduced = remove_visit(route, j)
        if reduced is None:
            del routes[src]
            del evals[src]
        else:
            routes[src] = reduced
            evals[src] = evaluate_route(inst, reduced)
        routes.append(fresh)
        evals.append(evaluate_route(inst, fresh))
    return Solution(tuple(routes), sol.unserved)


# ---------------------------------------------------------------------------
# stage 3: departure times

def latest_useful_departure(inst: ProblemInstance, route: Route) -> int:
    """Departure that removes as much waiting as possible without changing any
    visit's class (on time / delayed / missed) or the day-end check."""
    ev = evaluate_route(inst, route)
    sched = ev.schedule
    waited = 0
    bound = None
    for j, s in enumerate(route.stops):
        if s.kind is not StopKind.VISIT:
            continue
        begin = sched.service_start[j]
        waited += begin - sched.arrival[j]
        _, soft, hard = ev.windows[j]
        limit = soft if begin <= soft else hard
        slack = waited + limit - begin
        bound = slack if bound is None else min(bound, slack)
    shift = waited if bound is None else min(waited, bound)
    return sched.start_time + max(0, shift)


def finalize_routes_times(inst: ProblemInstance, sol: Solution) -> Solution:
    routes = tuple(
        Route(r.vehicle, r.stops, latest_useful_departure(inst, r)) for r in sol.routes
    )
    return Solution(routes, sol.unserved)


# ---------------------------------------------------------------------------
# stage 4: soft windows

def recover_soft_window_violations(inst: ProblemInstance, sol: Solution) -> Solution:
    """Cut total soft violations down to the budget.

    The most delayed visit is moved by the cheapest of: relocation into
    another route without adding delays, repositioning inside its own route,
    or a fresh route on an unused vehicle.  Less delayed visits are tried in
    turn when the worst one cannot be moved.  Raises ``RecoveryFailed`` when
    no delayed visit can be moved.
    """
    routes = list(sol.routes)
    evals = [evaluate_route(inst, r) for r in routes]
    budget = inst.soft_violation_budget
    while sum(e.soft_violations for e in evals) > budget:
        delayed = []
        for r, (route, ev) in enumerate(zip(routes, evals)):
            for j in movable_positions(route):
                begin = ev.schedule.service_start[j]
                soft = ev.windows[j][1]
                if begin > soft:
                    delayed.append((-(begin - soft), r, j))
        delayed.sort()
        done = False
        for _, r, j in delayed:
            if _fix_delay(inst, routes, evals, r, j):
                done = True
                break
        if not done:
            raise RecoveryFailed("no delayed visit can be moved", Solution(tuple(routes), sol.unserved))
    return Solution(tuple(routes), sol.unserved)


def _fix_delay(inst, routes, evals, r, j) -> bool:
    route = routes[r]
    ev = evals[r]
    stop = route.stops[j]
    c, amount = stop.customer, stop.delivered
    allowed = inst.customers[c].allowed_vehicles
    reduced = remove_visit(route, j)
    red_ev = evaluate_route(inst, reduced) if reduced is not None else None
    red_cost = red_ev.cost if red_ev is not None else 0
    d_cost = red_cost - ev.cost
    best = None  # (cost, kind, payload)

    # (a) another route, adding no delay there
    for t, tgt in enumerate(routes):
        if t == r or tgt.vehicle not in allowed or c in tgt.customers:
            continue
        tev = evals[t]
        cap = inst.vehicles[tgt.vehicle].total_capacity
        for p in range(len(tgt.stops) + 1):
            pr = probe_insertion(inst, tgt, c, amount, p, tev)
            if pr is None or pr.load > cap or pr.soft_violations > tev.soft_violations:
                continue
            cost = d_cost + pr.delta_cost
            if best is None or cost < best[0]:
                best = (cost, "move", (t, p))

    # (b) elsewhere in the same route
    if reduced is not None:
        for p in range(len(reduced.stops) + 1):
            pr = probe_insertion(inst, reduced, c, amount, p, red_ev)
            if pr is None or pr.soft_violations >= ev.soft_violations:
                continue
            cost = d_cost + pr.delta_cost
            if best is None or cost < best[0]:
                best = (cost, "shift", p)

    # (c) a route of its own
    fresh = _new_route_for(inst, routes, c, amount, soft_free=True)
    if fresh is not None:
        cost = d_cost + fresh[0]
        if best is None or cost < best[0]:
            best = (cost, "new", fresh[1])

    if best is None:
        return False
    _, kind, payload = best
    if kind == "shift":
        routes[r] = insert_visit(reduced, c, amount, payload)
        evals[r] = evaluate_route(inst, routes[r])
        return True
    if kind == "move":
        t, p = payload
        routes[t] = insert_visit(routes[t], c, amount, p)
        evals[t] = evaluate_route(inst, routes[t])
    else:
        routes.append(payload)
        evals.append(evaluate_route(inst, payload))
    if reduced is None:
        del routes[r]
        del evals[r]
    else:
        routes[r] = reduced
        evals[r] = red_ev
    return True


# ---------------------------------------------------------------------------

def recovery_pipeline(inst: ProblemInstance, sol: Solution,
                      rng: Optional[np.random.Generator] = None) -> Solution:
    """Optimise routes, fix capacity, compact times, fix soft windows.

    The result is checked for full feasibility; anything short of that raises
    ``RecoveryFailed`` (or its ``FleetExhausted`` subclass).
    """
    out = routes_optimization(inst, sol)
    out = recover_capacity_violations(inst, out, rng)
    out = finalize_routes_times(inst, out)
    out = recover_soft_window_violations(inst, out)
    if not is_feasible(inst, out):
        raise RecoveryFailed("repaired solution is still infeasible", out)
    return out
