"""Seeded synthetic instances.

Fleet tiers cycle small, medium, large by vehicle index:

    ======  =====  =======  ==========  ===========  =====
    tier    truck  trailer  fixed cost  cents/meter  speed
    ======  =====  =======  ==========  ===========  =====
    small      60        0        5000         0.10   11.0
    medium    100        0        8000         0.15   10.0
    large     100      100       12000         0.20    8.0
    ======  =====  =======  ==========  ===========  =====

The soft deadline sits at 70% of the hard window width.  Hard windows open
uniformly in the day, leaving an hour at the end for the trip home.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

from .model import (
    Customer,
    Location,
    ProblemInstance,
    TransshipmentPoint,
    Vehicle,
)
from .rng import make_rng

SOFT_FRACTION = 0.7
RETURN_RESERVE = 3600

FLEET_TIERS = (
    # truck, trailer, fixed_cost, cost_per_meter, speed
    (60, 0, 5000, 0.10, 11.0),
    (100, 0, 8000, 0.15, 10.0),
    (100, 100, 12000, 0.20, 8.0),
)


@dataclass(frozen=True)
class GenConfig:
    n_customers: int = 20
    n_vehicles: int = 8
    n_transshipments: int = 2
    truck_only_fraction: float = 0.2
    site_dependency_fraction: float = 0.2
    window_width_range: Tuple[int, int] = (5400, 14400)
    demand_range: Tuple[int, int] = (5, 40)
    area_side: float = 20000.0
    soft_violation_budget: int = 2
    split_budget: int = 1
    seed: int = 0
    day_start: int = 6 * 3600
    day_end: int = 18 * 3600
    service_time_fixed: int = 300
    service_time_per_unit: int = 6
    trailer_park_time: int = 600
    load_transfer_time_per_unit: int = 3

    def __post_init__(self):
        if self.n_customers < 0 or self.n_vehicles < 1 or self.n_transshipments < 0:
            raise ValueError("counts must be non-negative and the fleet nonempty")
        for name in ("truck_only_fraction", "site_dependency_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        lo, hi = self.window_width_range
        if not 0 < lo <= hi:
            raise ValueError("window_width_range must be a nonempty positive range")
        lo, hi = self.demand_range
        if not 0 < lo <= hi:
            raise ValueError("demand_range must be a nonempty positive range")
        if self.day_end - self.day_start < self.window_width_range[1] + RETURN_RESERVE:
            raise ValueError("day too short for the widest window")


def fleet(n_vehicles: int) -> List[Vehicle]:
    out = []
    for k in range(n_vehicles):
        truck, trailer, fixed, cpm, speed = FLEET_TIERS[k % len(FLEET_TIERS)]
        out.append(Vehicle(k, truck, trailer, fixed, cpm, speed))
    return out


def generate(config: GenConfig) -> ProblemInstance:
    rng = make_rng(config.seed)
    side = config.area_side
    depot = Location(round(side / 2), round(side / 2))
    vehicles = fleet(config.n_vehicles)
    trailerless = [v.id for v in vehicles if not v.has_trailer]

    def point() -> Location:
        x, y = rng.integers(0, int(side) + 1, size=2)
        return Location(int(x), int(y))

    transshipments = tuple(TransshipmentPoint(t, point()) for t in range(config.n_transshipments))

    customers = []
    wlo, whi = config.window_width_range
    dlo, dhi = config.demand_range
    for i in range(config.n_customers):
        loc = point()
        width = int(rng.integers(wlo, whi + 1))
        latest_open = config.day_end - width - RETURN_RESERVE
        hard_open = int(rng.integers(config.day_start, latest_open + 1))
        demand = int(rng.integers(dlo, dhi + 1))
        truck_only = bool(rng.random() < config.truck_only_fraction)
        allowed = {v.id for v in vehicles}
        if rng.random() < config.site_dependency_fraction:
            drop = rng.random(len(vehicles)) < 0.5
            allowed = {v.id for v, d in zip(vehicles, drop) if not d}
            if not allowed:
                allowed = {int(rng.integers(len(vehicles)))}
        if truck_only and not transshipments and trailerless:
            if not any(k in trailerless for k in allowed):
                allowed.add(trailerless[int(rng.integers(len(trailerless)))])
        customers.append(Customer(
            id=i,
            location=loc,
            demand=demand,
            hard_open=hard_open,
            hard_close=hard_open + width,
            soft_close=hard_open + int(SOFT_FRACTION * width),
            service_time_fixed=config.service_time_fixed,
            service_time_per_unit=config.service_time_per_unit,
            truck_only=truck_only,
            allowed_vehicles=frozenset(allowed),
        ))

    return ProblemInstance(
        depot=depot,
        customers=tuple(customers),
        vehicles=tuple(vehicles),
        transshipments=transshipments,
        day_start=config.day_start,
        day_end=config.day_end,
        soft_violation_budget=config.soft_violation_budget,
        split_budget=config.split_budget,
        trailer_park_time=config.trailer_park_time,
        load_transfer_time_per_unit=config.load_transfer_time_per_unit,
        name=f"gen-n{config.n_customers}-s{config.seed}",
    )
