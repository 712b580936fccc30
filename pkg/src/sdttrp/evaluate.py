"""Route scheduling, cost and feasibility arithmetic.

Everything here is a pure function of immutable inputs.  ``evaluate_route``
does a full forward pass and keeps enough prefix/suffix bookkeeping for
``probe_insertion`` to price an insertion without re-scheduling the whole
route: the arc cost change is O(1) and the re-schedule stops as soon as a
departure time coincides with the old schedule.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .model import (
    ProblemInstance,
    Route,
    Solution,
    Stop,
    StopKind,
    distance_cost,
    split_count,
)

VISIT, PARK, ATTACH = StopKind.VISIT, StopKind.PARK, StopKind.ATTACH

# window sentinel for park/attach stops: never wait, never late
_NO_WINDOW = (-(1 << 62), 1 << 62, 1 << 62)

COST_TOL = 1e-6


@dataclass(frozen=True)
class Schedule:
    arrival: Tuple[int, ...]
    service_start: Tuple[int, ...]
    departure: Tuple[int, ...]
    start_time: int
    return_time: int


@dataclass(frozen=True, eq=False)
class RouteEval:
    cost: int
    distance: int
    hard_feasible: bool        # windows, day end and capacity
    time_feasible: bool        # windows and day end only
    soft_violations: int
    load: int
    capacity_excess: int
    schedule: Schedule
    # per-stop layout used by the incremental probes
    nodes: Tuple[int, ...]
    windows: Tuple[Tuple[int, int, int], ...]
    durations: Tuple[int, ...]
    seg_park: Tuple[int, ...]          # index of the enclosing ParkTrailer, -1 outside
    seg_load: Dict[int, int]           # ParkTrailer index -> load delivered in its segment
    segments_fit: bool                 # every parked segment within truck capacity
    soft_before: Tuple[int, ...]       # soft violations among stops [0, j)
    ok_before: Tuple[bool, ...]        # stops [0, j) all within hard windows
    soft_after: Tuple[int, ...]        # soft violations among stops [j, L)
    ok_after: Tuple[bool, ...]         # stops [j, L) within windows and return on time


class Probe(NamedTuple):
    delta_cost: int
    soft_violations: int   # route total after the insertion
    load: int              # route load after the insertion


class Insertion(NamedTuple):
    delta_cost: int
    new_soft_violations: int


def _layout(inst: ProblemInstance, route: Route):
    n = inst.n
    nodes: List[int] = []
    windows: List[Tuple[int, int, int]] = []
    durations: List[int] = []
    seg_park: List[int] = []
    seg_load: Dict[int, int] = {}
    open_park = -1
    park_node = 0
    for j, s in enumerate(route.stops):
        kind = s.kind
        if kind is VISIT:
            c = inst.customers[s.customer]
            nodes.append(1 + s.customer)
            windows.append((c.hard_open, c.soft_close, c.hard_close))
            durations.append(c.service_time_fixed + c.service_time_per_unit * s.delivered)
            seg_park.append(open_park)
            if open_park >= 0:
                seg_load[open_park] += s.delivered
        elif kind is PARK:
            site = s.park_site
            park_node = 1 + site.index if site.kind == "customer" else 1 + n + site.index
            nodes.append(park_node)
            windows.append(_NO_WINDOW)
            durations.append(0)   # filled once the segment load is known
            seg_park.append(-1)
            open_park = j
            seg_load[j] = 0
        else:
            nodes.append(park_node)
            windows.append(_NO_WINDOW)
            durations.append(inst.trailer_park_time)
            seg_park.append(-1)
            open_park = -1
    for p, q in seg_load.items():
        durations[p] = inst.trailer_park_time + inst.load_transfer_time_per_unit * q
    return nodes, windows, durations, seg_park, seg_load


def evaluate_route(inst: ProblemInstance, route: Route) -> RouteEval:
    veh = inst.vehicles[route.vehicle]
    nodes, windows, durations, seg_park, seg_load = _layout(inst, route)
    D = inst.tables.dist
    T = inst.tables.times(veh.speed)

    start = inst.day_start if route.departure is None else route.departure
    L = len(nodes)
    arrival = [0] * L
    begin = [0] * L
    depart = [0] * L
    late = [0] * L
    ok = [True] * L
    t = start
    prev = 0
    dist = 0
    for j in range(L):
        node = nodes[j]
        dist += D[prev][node]
        arr = t + T[prev][node]
        op, so, cl = windows[j]
        st = arr if arr >= op else op
        arrival[j] = arr
        begin[j] = st
        if st > cl:
            ok[j] = False
        elif st > so:
            late[j] = 1
        t = st + durations[j]
        depart[j] = t
        prev = node
    dist += D[prev][0]
    ret = t + T[prev][0]
    ret_ok = ret <= inst.day_end

    soft_before = [0] * (L + 1)
    ok_before = [True] * (L + 1)
    for j in range(L):
        soft_before[j + 1] = soft_before[j] + late[j]
        ok_before[j + 1] = ok_before[j] and ok[j]
    soft_after = [0] * (L + 1)
    ok_after = [True] * (L + 1)
    ok_after[L] = ret_ok
    for j in range(L - 1, -1, -1):
        soft_after[j] = soft_after[j + 1] + late[j]
        ok_after[j] = ok_after[j + 1] and ok[j]

    load = sum(s.delivered for s in route.stops if s.kind is VISIT)
    excess = max(0, load - veh.total_capacity)
    time_ok = ok_after[0]
    return RouteEval(
        cost=veh.fixed_cost + distance_cost(dist, veh.cost_per_meter),
        distance=dist,
        hard_feasible=time_ok and excess == 0,
        time_feasible=time_ok,
        soft_violations=soft_after[0],
        load=load,
        capacity_excess=excess,
        schedule=Schedule(tuple(arrival), tuple(begin), tuple(depart), start, ret),
        nodes=tuple(nodes),
        windows=tuple(windows),
        durations=tuple(durations),
        seg_park=tuple(seg_park),
        seg_load=seg_load,
        segments_fit=all(q <= veh.truck_capacity for q in seg_load.values()),
        soft_before=tuple(soft_before),
        ok_before=tuple(ok_before),
        soft_after=tuple(soft_after),
        ok_after=tuple(ok_after),
    )


def schedule_route(inst: ProblemInstance, route: Route) -> Schedule:
    return evaluate_route(inst, route).schedule


def solution_cost(inst: ProblemInstance, sol: Solution) -> int:
    return sum(evaluate_route(inst, r).cost for r in sol.routes)


# ---------------------------------------------------------------------------
# route edits

def insert_visit(route: Route, customer: int, amount: int, position: int) -> Route:
    stops = route.stops
    new = stops[:position] + (Stop(VISIT, customer=customer, delivered=amount),) + stops[position:]
    return Route(route.vehicle, new, route.departure)


def is_anchor(route: Route, position: int) -> bool:
    """True when the visit at ``position`` hosts the trailer parked right after it."""
    stops = route.stops
    if position + 1 >= len(stops):
        return False
    nxt = stops[position + 1]
    return nxt.kind is PARK and nxt.park_site.kind == "customer"


def remove_visit(route: Route, position: int) -> Optional[Route]:
    """Route without the visit at ``position``; ``None`` when no visit is left.

    A parked segment left empty is dropped together with its markers.  Visits
    hosting a parked trailer are pinned and cannot be removed.
    """
    stops = list(route.stops)
    if stops[position].kind is not VISIT:
        raise ValueError(f"stop {position} is not a visit")
    if is_anchor(route, position):
        raise ValueError(f"visit at {position} hosts a parked trailer")
    del stops[position]
    if (0 < position < len(stops) and stops[position - 1].kind is PARK
            and stops[position].kind is ATTACH):
        del stops[position - 1:position + 1]
        # a customer-hosted park leaves its host visit in place; nothing else to fix
    if not any(s.kind is VISIT for s in stops):
        return None
    return Route(route.vehicle, tuple(stops), route.departure)


def movable_positions(route: Route) -> List[int]:
    return [j for j, s in enumerate(route.stops) if s.kind is VISIT and not is_anchor(route, j)]


# ---------------------------------------------------------------------------
# insertion / deletion pricing

def slot_segment(ev: RouteEval, route: Route, position: int) -> int:
    """Index of the ParkTrailer whose segment contains insertion slot ``position``, else -1."""
    if position == 0:
        return -1
    prev = route.stops[position - 1]
    if prev.kind is PARK:
        return position - 1
    if prev.kind is VISIT:
        return ev.seg_park[position - 1]
    return -1


def probe_insertion(inst: ProblemInstance, route: Route, customer: int, amount: int,
                    position: int, ev: Optional[RouteEval] = None) -> Optional[Probe]:
    """Price inserting a visit at ``position`` (before ``route.stops[position]``).

    Returns ``None`` when the insertion breaks a structural rule, a hard time
    window, the day end, or a parked segment's truck capacity.  The total
    vehicle capacity is *not* enforced here; the returned load lets callers
    decide.
    """
    if ev is None:
        ev = evaluate_route(inst, route)
    veh = inst.vehicles[route.vehicle]
    cust = inst.customers[customer]
    stops = route.stops
    L = len(stops)
    p = position
    if not 0 <= p <= L:
        raise IndexError(f"slot {p} outside 0..{L}")
    if route.vehicle not in cust.allowed_vehicles:
        return None
    if p < L and stops[p].kind is PARK and stops[p].park_site.kind == "customer":
        return None
    q = slot_segment(ev, route, p)
    if cust.truck_only and veh.has_trailer and q < 0:
        return None
    if q >= 0 and ev.seg_load[q] + amount > veh.truck_capacity:
        return None

    tables = inst.tables
    D = tables.dist
    T = tables.times(veh.speed)
    nodes = ev.nodes
    cn = 1 + customer
    a = nodes[p - 1] if p > 0 else 0
    b = nodes[p] if p < L else 0
    new_dist = ev.distance + D[a][cn] + D[cn][b] - D[a][b]
    delta = veh.fixed_cost + distance_cost(new_dist, veh.cost_per_meter) - ev.cost
    load = ev.load + amount

    r = q if q >= 0 else p
    if not ev.ok_before[r]:
        return None
    soft = ev.soft_before[r]
    sched = ev.schedule
    t = sched.departure[r - 1] if r > 0 else sched.start_time
    prev = nodes[r - 1] if r > 0 else 0
    windows = ev.windows
    durations = ev.durations
    for j in range(r, p):
        node = nodes[j]
        arr = t + T[prev][node]
        op, so, cl = windows[j]
        st = arr if arr >= op else op
        if st > cl:
            return None
        if st > so:
            soft += 1
        t = st + durations[j]
        if j == q:
            t += inst.load_transfer_time_per_unit * amount
        prev = node

    arr = t + T[prev][cn]
    st = arr if arr >= cust.hard_open else cust.hard_open
    if st > cust.hard_close:
        return None
    if st > cust.soft_close:
        soft += 1
    t = st + cust.service_time_fixed + cust.service_time_per_unit * amount
    prev = cn

    departs = sched.departure
    for j in range(p, L):
        node = nodes[j]
        arr = t + T[prev][node]
        op, so, cl = windows[j]
        st = arr if arr >= op else op
        if st > cl:
            return None
        if st > so:
            soft += 1
        t = st + durations[j]
        if t == departs[j]:
            if not ev.ok_after[j + 1]:
                return None
            return Probe(delta, soft + ev.soft_after[j + 1], load)
        prev = node
    if t + T[prev][0] > inst.day_end:
        return None
    return Probe(delta, soft, load)


def insertion_cost(inst: ProblemInstance, route: Route, customer: int, amount: int,
                   position: int, may_violate: bool, viol_allowance: int,
                   ev: Optional[RouteEval] = None) -> Optional[Insertion]:
    """Cost change of a strictly feasible insertion, or ``None`` (infeasible).

    Infeasible covers structure, hard windows, capacity, more than
    ``viol_allowance`` soft violations on the route, or, when ``may_violate``
    is false, any added soft violation.
    """
    if ev is None:
        ev = evaluate_route(inst, route)
    pr = probe_insertion(inst, route, customer, amount, position, ev)
    if pr is None:
        return None
    if pr.load > inst.vehicles[route.vehicle].total_capacity:
        return None
    added = pr.soft_violations - ev.soft_violations
    if pr.soft_violations > viol_allowance:
        return None
    if not may_violate and added > 0:
        return None
    return Insertion(pr.delta_cost, pr.soft_violations)


def deletion_cost(inst: ProblemInstance, route: Route, visit_position: int,
                  ev: Optional[RouteEval] = None) -> int:
    """Cost change of removing one visit; a route left without visits dissolves."""
    if ev is None:
        ev = evaluate_route(inst, route)
    new = remove_visit(route, visit_position)
    if new is None:
        return -ev.cost
    veh = inst.vehicles[route.vehicle]
    if len(new.stops) != len(route.stops) - 1:
        # an emptied parked segment went with the visit
        return route_distance_cost(inst, new) - ev.cost
    D = inst.tables.dist
    nodes = ev.nodes
    p = visit_position
    cn = nodes[p]
    a = nodes[p - 1] if p > 0 else 0
    b = nodes[p + 1] if p + 1 < len(nodes) else 0
    new_dist = ev.distance - D[a][cn] - D[cn][b] + D[a][b]
    return veh.fixed_cost + distance_cost(new_dist, veh.cost_per_meter) - ev.cost


def route_nodes(inst: ProblemInstance, route: Route) -> List[int]:
    n = inst.n
    nodes = []
    park_node = 0
    for s in route.stops:
        if s.kind is VISIT:
            nodes.append(1 + s.customer)
        elif s.kind is PARK:
            site = s.park_site
            park_node = 1 + site.index if site.kind == "customer" else 1 + n + site.index
            nodes.append(park_node)
        else:
            nodes.append(park_node)
    return nodes


def route_distance_cost(inst: ProblemInstance, route: Route) -> int:
    """Fixed plus distance cost of a route without scheduling it."""
    D = inst.tables.dist
    veh = inst.vehicles[route.vehicle]
    prev = 0
    dist = 0
    for node in route_nodes(inst, route):
        dist += D[prev][node]
        prev = node
    dist += D[prev][0]
    return veh.fixed_cost + distance_cost(dist, veh.cost_per_meter)


# ---------------------------------------------------------------------------
# structural rules and whole-solution feasibility

def route_structure_ok(inst: ProblemInstance, route: Route) -> bool:
    """Marker alternation, park-site rules, site dependency and truck-only rule."""
    if not 0 <= route.vehicle < len(inst.vehicles):
        return False
    veh = inst.vehicles[route.vehicle]
    k = route.vehicle
    parked = False
    prev: Optional[Stop] = None
    for s in route.stops:
        if s.kind is VISIT:
            if not 0 <= s.customer < inst.n or s.delivered <= 0:
                return False
            c = inst.customers[s.customer]
            if s.delivered > c.demand or k not in c.allowed_vehicles:
                return False
            if c.truck_only and veh.has_trailer and not parked:
                return False
        elif s.kind is PARK:
            if parked or not veh.has_trailer or s.park_site is None:
                return False
            site = s.park_site
            if site.kind == "customer":
                if (prev is None or prev.kind is not VISIT or prev.customer != site.index
                        or inst.customers[site.index].truck_only):
                    return False
            elif site.kind != "transshipment" or not 0 <= site.index < len(inst.transshipments):
                return False
            parked = True
        else:
            if not parked:
                return False
            parked = False
        prev = s
    return not parked


class Feasibility(NamedTuple):
    structure: bool
    vehicles_unique: bool
    time_windows: bool
    capacity: bool
    coverage: bool
    splits: bool
    soft_budget: bool

    @property
    def feasible(self) -> bool:
        return all(self)


def solution_feasibility(inst: ProblemInstance, sol: Solution,
                         evals: Optional[Sequence[RouteEval]] = None) -> Feasibility:
    structure = all(route_structure_ok(inst, r) for r in sol.routes)
    vehicles = [r.vehicle for r in sol.routes]
    unique = len(set(vehicles)) == len(vehicles)
    if not structure:
        return Feasibility(False, unique, False, False, False, False, False)
    if evals is None:
        evals = [evaluate_route(inst, r) for r in sol.routes]
    if sol.routes and any(r.departure is not None and r.departure < inst.day_start for r in sol.routes):
        time_ok = False
    else:
        time_ok = all(e.time_feasible for e in evals)
    capacity = all(e.capacity_excess == 0 and e.segments_fit for e in evals)
    totals = sol.delivered_totals()
    coverage = all(totals.get(i, 0) == c.demand for i, c in enumerate(inst.customers))
    coverage = coverage and len(totals) <= inst.n
    splits = split_count(sol) <= inst.split_budget
    soft = sum(e.soft_violations for e in evals) <= inst.soft_violation_budget
    return Feasibility(structure, unique, time_ok, capacity, coverage, splits, soft)


def is_feasible(inst: ProblemInstance, sol: Solution) -> bool:
    return solution_feasibility(inst, sol).feasible
