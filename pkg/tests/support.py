"""Builders and independent oracles shared by the test modules."""
from __future__ import annotations

import itertools
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from sdttrp.evaluate import insert_visit, movable_positions, probe_insertion, remove_visit
from sdttrp.greedy import GreedyParams, build_initial_solution
from sdttrp.instgen import GenConfig, generate
from sdttrp.model import (
    Customer,
    Location,
    ProblemInstance,
    Route,
    Solution,
    TransshipmentPoint,
    Vehicle,
)

DAY = 86400


def customer(i, x, y, demand=10, window=(0, DAY, DAY), service=(0, 0), truck_only=False, allowed=None):
    op, so, cl = window
    return Customer(
        id=i, location=Location(x, y), demand=demand, hard_open=op, soft_close=so, hard_close=cl,
        service_time_fixed=service[0], service_time_per_unit=service[1], truck_only=truck_only,
        allowed_vehicles=frozenset(allowed if allowed is not None else (0,)),
    )


def make_instance(customers: Sequence[Customer], vehicles: Sequence[Vehicle],
                  transshipments: Sequence[Tuple[float, float]] = (), depot=(0, 0), **kw) -> ProblemInstance:
    kw.setdefault("day_start", 0)
    kw.setdefault("day_end", DAY)
    return ProblemInstance(
        depot=Location(*depot),
        customers=tuple(customers),
        vehicles=tuple(vehicles),
        transshipments=tuple(TransshipmentPoint(t, Location(x, y)) for t, (x, y) in enumerate(transshipments)),
        **kw,
    )


class ScriptedRng:
    """Stands in for a numpy Generator, replaying fixed ``random()`` draws."""

    def __init__(self, draws: Sequence[float], ints: Sequence[int] = ()):
        self.draws = list(draws)
        self.ints = list(ints)
        self.used = 0

    def random(self):
        self.used += 1
        return self.draws.pop(0)

    def integers(self, hi):
        return self.ints.pop(0) if self.ints else 0


# ---------------------------------------------------------------------------
# plain-math route arithmetic (no travel tables, no evaluate module)

def dist(a: Location, b: Location) -> int:
    return math.ceil(math.hypot(a.x - b.x, a.y - b.y))


def stop_location(inst: ProblemInstance, stop) -> Location:
    if stop.kind.value == "visit":
        return inst.customers[stop.customer].location
    if stop.kind.value == "park_trailer":
        site = stop.park_site
        if site.kind == "customer":
            return inst.customers[site.index].location
        return inst.transshipments[site.index].location
    return None


def reverse_order_cost(inst: ProblemInstance, route: Route) -> int:
    """Route cost summing arcs from the last one back to the first."""
    veh = inst.vehicles[route.vehicle]
    locs = [inst.depot]
    park_at = None
    for s in route.stops:
        loc = stop_location(inst, s)
        if s.kind.value == "park_trailer":
            park_at = loc
        if s.kind.value == "attach_trailer":
            loc = park_at
        locs.append(loc)
    locs.append(inst.depot)
    total = 0
    for k in range(len(locs) - 1, 0, -1):
        total += dist(locs[k - 1], locs[k])
    return veh.fixed_cost + round(total * veh.cost_per_meter)


def hand_schedule(inst: ProblemInstance, route: Route, start: Optional[int] = None):
    """Forward recurrence written out longhand: (arrival, start, departure) per stop, return time."""
    veh = inst.vehicles[route.vehicle]
    t = inst.day_start if start is None else start
    here = inst.depot
    rows = []
    segment_loads = {}
    open_park = None
    for j, s in enumerate(route.stops):
        if s.kind.value == "park_trailer":
            open_park = j
            segment_loads[j] = 0
        elif s.kind.value == "attach_trailer":
            open_park = None
        elif open_park is not None:
            segment_loads[open_park] += s.delivered
    park_at = None
    for j, s in enumerate(route.stops):
        loc = stop_location(inst, s)
        if s.kind.value == "park_trailer":
            park_at = loc
        if s.kind.value == "attach_trailer":
            loc = park_at
        arrival = t + math.ceil(dist(here, loc) / veh.speed)
        if s.kind.value == "visit":
            c = inst.customers[s.customer]
            begin = max(arrival, c.hard_open)
            leave = begin + c.service_time_fixed + c.service_time_per_unit * s.delivered
        elif s.kind.value == "park_trailer":
            begin = arrival
            leave = begin + inst.trailer_park_time + inst.load_transfer_time_per_unit * segment_loads[j]
        else:
            begin = arrival
            leave = begin + inst.trailer_park_time
        rows.append((arrival, begin, leave))
        t, here = leave, loc
    return rows, t + math.ceil(dist(here, inst.depot) / veh.speed)


# ---------------------------------------------------------------------------
# exhaustive optimum for tiny instances without splits or parking

def _tour_classes(inst: ProblemInstance, k: int, members: Tuple[int, ...]) -> Dict[int, int]:
    """Cheapest time-feasible order of ``members`` on vehicle ``k``, per soft-violation count."""
    veh = inst.vehicles[k]
    best: Dict[int, int] = {}
    for order in itertools.permutations(members):
        t, here, meters, late, ok = inst.day_start, inst.depot, 0, 0, True
        for i in order:
            c = inst.customers[i]
            d = dist(here, c.location)
            meters += d
            begin = max(t + math.ceil(d / veh.speed), c.hard_open)
            if begin > c.hard_close:
                ok = False
                break
            late += begin > c.soft_close
            t = begin + c.service_time_fixed + c.service_time_per_unit * c.demand
            here = c.location
        if not ok:
            continue
        d = dist(here, inst.depot)
        if t + math.ceil(d / veh.speed) > inst.day_end:
            continue
        cost = veh.fixed_cost + round((meters + d) * veh.cost_per_meter)
        if cost < best.get(late, math.inf):
            best[late] = cost
    return best


def brute_force_optimum(inst: ProblemInstance) -> Optional[int]:
    """Minimum cost over all complete solutions, every customer served whole by one route.

    Assumes no truck-only customer may use a trailer vehicle, so parking
    never has to be considered (it could only add distance and time).
    """
    n, m = inst.n, len(inst.vehicles)
    full = (1 << n) - 1
    options = []   # per vehicle: list of (mask, soft, cost)
    for k, veh in enumerate(inst.vehicles):
        allowed = [i for i in range(n) if k in inst.customers[i].allowed_vehicles
                   and not (inst.customers[i].truck_only and veh.has_trailer)]
        opts = []
        for size in range(1, len(allowed) + 1):
            for members in itertools.combinations(allowed, size):
                if sum(inst.customers[i].demand for i in members) > veh.total_capacity:
                    continue
                mask = sum(1 << i for i in members)
                for soft, cost in _tour_classes(inst, k, members).items():
                    opts.append((mask, soft, cost))
        options.append(opts)

    v = inst.soft_violation_budget
    layer = {(0, 0): 0}
    for opts in options:
        nxt = dict(layer)
        for (mask, soft), cost in layer.items():
            for m2, s2, c2 in opts:
                if mask & m2 or soft + s2 > v:
                    continue
                key = (mask | m2, soft + s2)
                if cost + c2 < nxt.get(key, math.inf):
                    nxt[key] = cost + c2
        layer = nxt
    costs = [c for (mask, _), c in layer.items() if mask == full]
    return min(costs) if costs else None


def tiny_instance(seed: int) -> ProblemInstance:
    """Small generated instance (4 to 7 customers, 2 or 3 vehicles) within reach of brute force."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 8))
    m = int(rng.integers(2, 4))
    inst = generate(GenConfig(n_customers=n, n_vehicles=m, n_transshipments=0, split_budget=0,
                              soft_violation_budget=int(rng.integers(0, 3)), seed=seed))
    trailerless = {v.id for v in inst.vehicles if not v.has_trailer}
    fixed = []
    for c in inst.customers:
        allowed = c.allowed_vehicles
        if c.truck_only:
            allowed = (allowed & trailerless) or trailerless
        fixed.append(Customer(**{**c.__dict__, "allowed_vehicles": frozenset(allowed)}))
    return inst.replace(customers=tuple(fixed), name=f"tiny-{seed}")


# ---------------------------------------------------------------------------
# corpora

def generated(seed: int, n: Optional[int] = None, **kw) -> ProblemInstance:
    if n is None:
        n = 5 + seed % 26
    kw.setdefault("n_vehicles", max(3, n // 2 + 2))
    return generate(GenConfig(n_customers=n, seed=seed, **kw))


def greedy_solution(inst: ProblemInstance, seed: int = 0, attempts: int = 10) -> Optional[Solution]:
    for a in range(attempts):
        sol = build_initial_solution(inst, GreedyParams(rng_seed=seed * 100 + a))
        if not sol.unserved:
            return sol
    return None


def mutate(inst: ProblemInstance, sol: Solution, rng: np.random.Generator) -> Solution:
    """One random edit that may or may not keep the solution feasible."""
    routes = list(sol.routes)
    if not routes:
        return sol
    r = int(rng.integers(len(routes)))
    route = routes[r]
    kind = int(rng.integers(6))
    visits = [j for j, s in enumerate(route.stops) if s.kind.value == "visit"]
    if kind == 0:            # swap two stops
        if len(route.stops) >= 2:
            a, b = rng.choice(len(route.stops), 2, replace=False)
            stops = list(route.stops)
            stops[a], stops[b] = stops[b], stops[a]
            routes[r] = Route(route.vehicle, tuple(stops))
    elif kind == 1:          # change a delivered amount
        j = visits[int(rng.integers(len(visits)))]
        s = route.stops[j]
        stops = list(route.stops)
        stops[j] = s.__class__(s.kind, customer=s.customer, delivered=max(1, s.delivered + int(rng.integers(-3, 4))))
        routes[r] = Route(route.vehicle, tuple(stops))
    elif kind == 2:          # move a visit to another route, any slot
        movable = movable_positions(route)
        if movable and len(routes) > 1:
            j = movable[int(rng.integers(len(movable)))]
            s = route.stops[j]
            t = int(rng.integers(len(routes) - 1))
            t = t + (t >= r)
            reduced = remove_visit(route, j)
            target = routes[t]
            routes[t] = insert_visit(target, s.customer, s.delivered, int(rng.integers(len(target.stops) + 1)))
            if reduced is None:
                del routes[r]
            else:
                routes[r] = reduced
    elif kind == 3:          # hand the route to another vehicle
        routes[r] = Route(int(rng.integers(len(inst.vehicles))), route.stops)
    elif kind == 4:          # drop a stop
        j = int(rng.integers(len(route.stops)))
        stops = route.stops[:j] + route.stops[j + 1:]
        if stops:
            routes[r] = Route(route.vehicle, stops)
        else:
            del routes[r]
    else:                    # relocate with a time-feasible slot, ignoring capacity and soft budget
        movable = movable_positions(route)
        if movable and len(routes) > 1:
            j = movable[int(rng.integers(len(movable)))]
            s = route.stops[j]
            t = int(rng.integers(len(routes) - 1))
            t = t + (t >= r)
            target = routes[t]
            for p in rng.permutation(len(target.stops) + 1):
                if probe_insertion(inst, target, s.customer, s.delivered, int(p)) is not None:
                    reduced = remove_visit(route, j)
                    routes[t] = insert_visit(target, s.customer, s.delivered, int(p))
                    if reduced is None:
                        del routes[r]
                    else:
                        routes[r] = reduced
                    break
    return Solution(tuple(routes))
