"""Problem data, route structure, and the standalone solution validator.

Units: coordinates and distances in meters, times in integer seconds of the
day, loads in integer units, money in integer cents.  Every value type is an
immutable dataclass; a new value is built whenever something changes.

Node numbering used by the travel tables: 0 is the depot, ``1 + i`` is
customer ``i`` and ``1 + n + t`` is transshipment point ``t``.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple


# ---------------------------------------------------------------------------
# metric

def travel_distance(a: "Location", b: "Location") -> int:
    """Euclidean distance rounded up to whole meters.

    Rounding up keeps the triangle inequality, so removing a stop from a
    route can never make it longer or later.
    """
    return math.ceil(math.hypot(a.x - b.x, a.y - b.y))


def travel_time(distance: int, speed: float) -> int:
    return math.ceil(distance / speed)


def distance_cost(distance: int, cost_per_meter: float) -> int:
    return round(distance * cost_per_meter)


# ---------------------------------------------------------------------------
# instance data

@dataclass(frozen=True)
class Location:
    x: float
    y: float


@dataclass(frozen=True)
class Customer:
    id: int
    location: Location
    demand: int
    hard_open: int
    hard_close: int
    soft_close: int
    service_time_fixed: int = 0
    service_time_per_unit: int = 0
    truck_only: bool = False
    allowed_vehicles: frozenset = frozenset()


@dataclass(frozen=True)
class Vehicle:
    id: int
    truck_capacity: int
    trailer_capacity: int = 0
    fixed_cost: int = 0
    cost_per_meter: float = 1.0
    speed: float = 10.0

    @property
    def total_capacity(self) -> int:
        return self.truck_capacity + self.trailer_capacity

    @property
    def has_trailer(self) -> bool:
        return self.trailer_capacity > 0


@dataclass(frozen=True)
class TransshipmentPoint:
    id: int
    location: Location


class TravelTables:
    """Dense distance table plus one travel-time table per distinct speed.

    Tables are nested lists: scalar indexing into lists is several times
    faster than into numpy arrays in the scheduling loops.
    """

    def __init__(self, locations: Sequence[Location]):
        self.locations = list(locations)
        self.dist: List[List[int]] = [
            [travel_distance(a, b) for b in self.locations] for a in self.locations
        ]
        self._times: Dict[float, List[List[int]]] = {}

    def times(self, speed: float) -> List[List[int]]:
        table = self._times.get(speed)
        if table is None:
            table = [[travel_time(d, speed) for d in row] for row in self.dist]
            self._times[speed] = table
        return table


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    depot: Location
    customers: Tuple[Customer, ...]
    vehicles: Tuple[Vehicle, ...]
    transshipments: Tuple[TransshipmentPoint, ...] = ()
    day_start: int = 0
    day_end: int = 86400
    soft_violation_budget: int = 0
    split_budget: int = 0
    trailer_park_time: int = 0
    load_transfer_time_per_unit: int = 0
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.customers)

    def customer_node(self, i: int) -> int:
        return 1 + i

    def transshipment_node(self, t: int) -> int:
        return 1 + len(self.customers) + t

    @cached_property
    def tables(self) -> TravelTables:
        locs = [self.depot]
        locs += [c.location for c in self.customers]
        locs += [t.location for t in self.transshipments]
        return TravelTables(locs)

    def replace(self, **changes) -> "ProblemInstance":
        from dataclasses import replace
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# routes

class StopKind(str, Enum):
    VISIT = "visit"
    PARK = "park_trailer"
    ATTACH = "attach_trailer"


class ParkSite(NamedTuple):
    """Where a trailer is left: ``("transshipment", t)`` or ``("customer", i)``."""

    kind: str
    index: int


@dataclass(frozen=True)
class Stop:
    kind: StopKind
    customer: Optional[int] = None
    delivered: int = 0
    park_site: Optional[ParkSite] = None

    @property
    def is_visit(self) -> bool:
        return self.kind is StopKind.VISIT


def visit(customer: int, delivered: int) -> Stop:
    return Stop(StopKind.VISIT, customer=customer, delivered=delivered)


def park_at_transshipment(t: int) -> Stop:
    return Stop(StopKind.PARK, park_site=ParkSite("transshipment", t))


def park_at_customer(i: int) -> Stop:
    return Stop(StopKind.PARK, park_site=ParkSite("customer", i))


ATTACH = Stop(StopKind.ATTACH)


def attach() -> Stop:
    return ATTACH


@dataclass(frozen=True)
class Route:
    """One vehicle's tour.  ``departure`` is the depot departure time; ``None``
    means the start of the day."""

    vehicle: int
    stops: Tuple[Stop, ...] = ()
    departure: Optional[int] = None

    @property
    def visits(self) -> List[Stop]:
        return [s for s in self.stops if s.kind is StopKind.VISIT]

    @property
    def customers(self) -> List[int]:
        return [s.customer for s in self.stops if s.kind is StopKind.VISIT]

    @property
    def load(self) -> int:
        return sum(s.delivered for s in self.stops if s.kind is StopKind.VISIT)


@dataclass(frozen=True)
class Solution:
    routes: Tuple[Route, ...] = ()
    # customer -> demand still unserved when construction ran out of vehicles
    unserved: Tuple[Tuple[int, int], ...] = ()

    @property
    def fleet_exhausted(self) -> bool:
        return bool(self.unserved)

    def delivered_totals(self) -> Dict[int, int]:
        totals: Dict[int, int] = {}
        for route in self.routes:
            for s in route.stops:
                if s.kind is StopKind.VISIT:
                    totals[s.customer] = totals.get(s.customer, 0) + s.delivered
        return totals


def split_count(sol: Solution) -> int:
    """Number of extra routes serving a customer, summed over customers."""
    routes_per_customer: Counter = Counter()
    for route in sol.routes:
        for c in set(route.customers):
            routes_per_customer[c] += 1
    return sum(r - 1 for r in routes_per_customer.values() if r > 1)


# ---------------------------------------------------------------------------
# validation

def _finite(loc: Location) -> bool:
    return math.isfinite(loc.x) and math.isfinite(loc.y)


def validate_instance(inst: ProblemInstance) -> List[str]:
    """List every broken instance rule; empty means the instance is well formed."""
    out: List[str] = []
    m = len(inst.vehicles)
    if not _finite(inst.depot):
        out.append("depot: coordinates must be finite")
    if not inst.day_start < inst.day_end:
        out.append("day_start/day_end: day_start must be before day_end")
    for name in ("soft_violation_budget", "split_budget", "trailer_park_time",
                 "load_transfer_time_per_unit"):
        if getattr(inst, name) < 0:
            out.append(f"{name}: must be non-negative")

    if [v.id for v in inst.vehicles] != list(range(m)):
        out.append("vehicles: ids must be distinct and dense in 0..m-1 in list order")
    for k, v in enumerate(inst.vehicles):
        tag = f"vehicles[{k}]"
        if v.truck_capacity <= 0:
            out.append(f"{tag}.truck_capacity: must be positive")
        if v.trailer_capacity < 0:
            out.append(f"{tag}.trailer_capacity: must be non-negative")
        if not v.speed > 0 or not math.isfinite(v.speed):
            out.append(f"{tag}.speed: must be positive and finite")
        if v.fixed_cost < 0 or not v.cost_per_meter >= 0:
            out.append(f"{tag}: costs must be non-negative")

    if [c.id for c in inst.customers] != list(range(inst.n)):
        out.append("customers: ids must be distinct and dense in 0..n-1 in list order")
    for i, c in enumerate(inst.customers):
        tag = f"customers[{i}]"
        if not _finite(c.location):
            out.append(f"{tag}.location: coordinates must be finite")
        if c.demand <= 0:
            out.append(f"{tag}.demand: must be positive")
        if c.service_time_fixed < 0 or c.service_time_per_unit < 0:
            out.append(f"{tag}: service times must be non-negative")
        if not c.hard_open <= c.soft_close <= c.hard_close:
            out.append(f"{tag}: window ordering hard_open <= soft_close <= hard_close broken")
        if c.hard_close < inst.day_start or c.hard_open > inst.day_end:
            out.append(f"{tag}: hard window does not intersect the working day")
        if not c.allowed_vehicles:
            out.append(f"{tag}.allowed_vehicles: K_i must be nonempty")
        bad = sorted(k for k in c.allowed_vehicles if not 0 <= k < m)
        if bad:
            out.append(f"{tag}.allowed_vehicles: unknown vehicle ids {bad}")

    if [t.id for t in inst.transshipments] != list(range(len(inst.transshipments))):
        out.append("transshipments: ids must be distinct and dense in list order")
    for t, p in enumerate(inst.transshipments):
        if not _finite(p.location):
            out.append(f"transshipments[{t}].location: coordinates must be finite")
    return out


def validate_solution(inst: ProblemInstance, sol: Solution) -> List[str]:
    """Check a complete solution against every problem rule.

    Deliberately written without the ``evaluate`` machinery (no travel
    tables, no incremental state) so the two can be cross-checked.
    """
    out: List[str] = []
    n, m = inst.n, len(inst.vehicles)
    delivered: Dict[int, int] = {}
    routes_serving: Dict[int, int] = {}
    used_vehicles: Dict[int, int] = {}
    total_delays = 0

    for r, route in enumerate(sol.routes):
        tag = f"routes[{r}]"
        if not 0 <= route.vehicle < m:
            out.append(f"{tag}: unknown vehicle {route.vehicle}")
            continue
        if route.vehicle in used_vehicles:
            out.append(f"{tag}: vehicle {route.vehicle} already runs routes[{used_vehicles[route.vehicle]}]")
        else:
            used_vehicles[route.vehicle] = r
        veh = inst.vehicles[route.vehicle]

        # structural walk
        structure_ok = True
        parked_at: Optional[int] = None          # index of the open ParkTrailer
        segments: List[Tuple[int, int]] = []     # (park index, load inside)
        seg_load = 0
        load = 0
        customers_here = set()
        for s, stop in enumerate(route.stops):
            where = f"{tag}.stops[{s}]"
            if stop.kind is StopKind.VISIT:
                c = stop.customer
                if c is None or not 0 <= c < n:
                    out.append(f"{where}: unknown customer {c}")
                    structure_ok = False
                    continue
                cust = inst.customers[c]
                if stop.delivered <= 0:
                    out.append(f"{where}: delivered amount must be positive")
                if stop.delivered > cust.demand:
                    out.append(f"{where}: delivered {stop.delivered} exceeds demand {cust.demand} of customer {c}")
                if route.vehicle not in cust.allowed_vehicles:
                    out.append(f"{where}: site dependency broken, vehicle {route.vehicle} may not serve customer {c}")
                if cust.truck_only and veh.has_trailer and parked_at is None:
                    out.append(f"{where}: truck-only customer {c} visited while towing a trailer")
                load += stop.delivered
                if parked_at is not None:
                    seg_load += stop.delivered
                delivered[c] = delivered.get(c, 0) + stop.delivered
                customers_here.add(c)
            elif stop.kind is StopKind.PARK:
                if not veh.has_trailer:
                    out.append(f"{where}: vehicle {route.vehicle} has no trailer to park")
                    structure_ok = False
                if parked_at is not None:
                    out.append(f"{where}: park/attach markers must alternate (trailer already parked)")
                    structure_ok = False
                site = stop.park_site
                if site is None:
                    out.append(f"{where}: park stop without a site")
                    structure_ok = False
                elif site.kind == "transshipment":
                    if not 0 <= site.index < len(inst.transshipments):
                        out.append(f"{where}: unknown transshipment {site.index}")
                        structure_ok = False
                elif site.kind == "customer":
                    prev = route.stops[s - 1] if s > 0 else None
                    if prev is None or prev.kind is not StopKind.VISIT or prev.customer != site.index:
                        out.append(f"{where}: trailer parked at customer {site.index} must directly follow a visit there")
                        structure_ok = False
                    elif inst.customers[site.index].truck_only:
                        out.append(f"{where}: trailer may not be parked at truck-only customer {site.index}")
                        structure_ok = False
                else:
                    out.append(f"{where}: bad park site kind {site.kind!r}")
                    structure_ok = False
                parked_at = s
                seg_load = 0
            elif stop.kind is StopKind.ATTACH:
                if parked_at is None:
                    out.append(f"{where}: attach without a parked trailer")
                    structure_ok = False
                else:
                    segments.append((parked_at, seg_load))
                parked_at = None
            else:
                out.append(f"{where}: unknown stop kind {stop.kind!r}")
                structure_ok = False
        if parked_at is not None:
            out.append(f"{tag}: trailer parked at stop {parked_at} is never reattached")
            structure_ok = False
        for c in customers_here:
            routes_serving[c] = routes_serving.get(c, 0) + 1

        if load > veh.total_capacity:
            out.append(f"{tag}: capacity exceeded, load {load} > {veh.total_capacity}")
        for p, seg in segments:
            if seg > veh.truck_capacity:
                out.append(f"{tag}: parked segment at stop {p} carries {seg} > truck capacity {veh.truck_capacity}")
        if not structure_ok:
            continue

        # timing walk
        seg_of_park = dict(segments)
        start = inst.day_start if route.departure is None else route.departure
        if start < inst.day_start:
            out.append(f"{tag}: departs at {start} before the day starts")
        clock = start
        here = inst.depot
        park_location = None
        for s, stop in enumerate(route.stops):
            if stop.kind is StopKind.VISIT:
                cust = inst.customers[stop.customer]
                there = cust.location
            elif stop.kind is StopKind.PARK:
                site = stop.park_site
                if site.kind == "transshipment":
                    there = inst.transshipments[site.index].location
                else:
                    there = inst.customers[site.index].location
                park_location = there
            else:
                there = park_location
            clock += travel_time(travel_distance(here, there), veh.speed)
            here = there
            if stop.kind is StopKind.VISIT:
                begin = max(clock, cust.hard_open)
                if begin > cust.hard_close:
                    out.append(f"{tag}.stops[{s}]: hard window of customer {stop.customer} missed (service at {begin} > {cust.hard_close})")
                elif begin > cust.soft_close:
                    total_delays += 1
                clock = begin + cust.service_time_fixed + cust.service_time_per_unit * stop.delivered
            elif stop.kind is StopKind.PARK:
                clock += inst.trailer_park_time + inst.load_transfer_time_per_unit * seg_of_park[s]
            else:
                clock += inst.trailer_park_time
        clock += travel_time(travel_distance(here, inst.depot), veh.speed)
        if clock > inst.day_end:
            out.append(f"{tag}: returns at {clock} after the day ends at {inst.day_end}")

    for i, cust in enumerate(inst.customers):
        got = delivered.get(i, 0)
        if got != cust.demand:
            out.append(f"customer {i}: demand mismatch, delivered {got} of {cust.demand}")
    splits = sum(r - 1 for r in routes_serving.values())
    if splits > inst.split_budget:
        out.append(f"solution: {splits} split deliveries exceed the budget of {inst.split_budget}")
    if total_delays > inst.soft_violation_budget:
        out.append(f"solution: {total_delays} soft window violations exceed the budget of {inst.soft_violation_budget}")
    return out
