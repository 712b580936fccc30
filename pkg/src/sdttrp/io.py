"""JSON documents for instances, solutions and run reports (format ``sdttrp-1``).

Times are integer seconds, distances meters, money integer cents.  Output is
produced with a fixed key order so equal inputs give byte-identical files.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Union

from .evaluate import evaluate_route
from .model import (
    ATTACH,
    Customer,
    Location,
    ParkSite,
    ProblemInstance,
    Route,
    Solution,
    Stop,
    StopKind,
    TransshipmentPoint,
    Vehicle,
    park_at_customer,
    park_at_transshipment,
    visit,
)

FORMAT = "sdttrp-1"


class FormatError(ValueError):
    pass


def _check_format(doc: Dict[str, Any], what: str) -> None:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise FormatError(f"{what}: expected a JSON object with \"format\": \"{FORMAT}\"")


def _num(v):
    return int(v) if float(v).is_integer() else float(v)


# ---------------------------------------------------------------------------
# instances

def instance_to_dict(inst: ProblemInstance) -> Dict[str, Any]:
    return {
        "format": FORMAT,
        "name": inst.name,
        "day_start": inst.day_start,
        "day_end": inst.day_end,
        "soft_violation_budget": inst.soft_violation_budget,
        "split_budget": inst.split_budget,
        "trailer_park_time": inst.trailer_park_time,
        "load_transfer_time_per_unit": inst.load_transfer_time_per_unit,
        "depot": {"x": _num(inst.depot.x), "y": _num(inst.depot.y)},
        "vehicles": [
            {
                "id": v.id,
                "truck_capacity": v.truck_capacity,
                "trailer_capacity": v.trailer_capacity,
                "fixed_cost": v.fixed_cost,
                "cost_per_meter": v.cost_per_meter,
                "speed": v.speed,
            }
            for v in inst.vehicles
        ],
        "transshipments": [
            {"id": t.id, "x": _num(t.location.x), "y": _num(t.location.y)}
            for t in inst.transshipments
        ],
        "customers": [
            {
                "id": c.id,
                "x": _num(c.location.x),
                "y": _num(c.location.y),
                "demand": c.demand,
                "hard_open": c.hard_open,
                "soft_close": c.soft_close,
                "hard_close": c.hard_close,
                "service_time_fixed": c.service_time_fixed,
                "service_time_per_unit": c.service_time_per_unit,
                "truck_only": c.truck_only,
                "allowed_vehicles": sorted(c.allowed_vehicles),
            }
            for c in inst.customers
        ],
    }


def instance_from_dict(doc: Dict[str, Any]) -> ProblemInstance:
    _check_format(doc, "instance")
    try:
        return ProblemInstance(
            depot=Location(doc["depot"]["x"], doc["depot"]["y"]),
            customers=tuple(
                Customer(
                    id=int(c["id"]),
                    location=Location(c["x"], c["y"]),
                    demand=int(c["demand"]),
                    hard_open=int(c["hard_open"]),
                    hard_close=int(c["hard_close"]),
                    soft_close=int(c["soft_close"]),
                    service_time_fixed=int(c.get("service_time_fixed", 0)),
                    service_time_per_unit=int(c.get("service_time_per_unit", 0)),
                    truck_only=bool(c.get("truck_only", False)),
                    allowed_vehicles=frozenset(int(k) for k in c["allowed_vehicles"]),
                )
                for c in doc["customers"]
            ),
            vehicles=tuple(
                Vehicle(
                    id=int(v["id"]),
                    truck_capacity=int(v["truck_capacity"]),
                    trailer_capacity=int(v.get("trailer_capacity", 0)),
                    fixed_cost=int(v.get("fixed_cost", 0)),
                    cost_per_meter=float(v.get("cost_per_meter", 1.0)),
                    speed=float(v["speed"]),
                )
                for v in doc["vehicles"]
            ),
            transshipments=tuple(
                TransshipmentPoint(int(t["id"]), Location(t["x"], t["y"]))
                for t in doc.get("transshipments", [])
            ),
            day_start=int(doc["day_start"]),
            day_end=int(doc["day_end"]),
            soft_violation_budget=int(doc.get("soft_violation_budget", 0)),
            split_budget=int(doc.get("split_budget", 0)),
            trailer_park_time=int(doc.get("trailer_park_time", 0)),
            load_transfer_time_per_unit=int(doc.get("load_transfer_time_per_unit", 0)),
            name=str(doc.get("name", "")),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"instance: missing or malformed field {exc}") from exc


# ---------------------------------------------------------------------------
# solutions

def _stop_to_dict(stop: Stop) -> Dict[str, Any]:
    out: Dict[str, Any] = {"kind": stop.kind.value}
    if stop.kind is StopKind.VISIT:
        out["customer"] = stop.customer
        out["delivered"] = stop.delivered
    elif stop.kind is StopKind.PARK:
        out["park_site"] = {stop.park_site.kind: stop.park_site.index}
    return out


def _stop_from_dict(d: Dict[str, Any]) -> Stop:
    kind = d.get("kind")
    if kind == StopKind.VISIT.value:
        return visit(int(d["customer"]), int(d["delivered"]))
    if kind == StopKind.PARK.value:
        site = d["park_site"]
        if not isinstance(site, dict) or len(site) != 1:
            raise FormatError(f"park_site must be {{\"transshipment\": t}} or {{\"customer\": i}}, got {site!r}")
        (k, idx), = site.items()
        if k == "transshipment":
            return park_at_transshipment(int(idx))
        if k == "customer":
            return park_at_customer(int(idx))
        raise FormatError(f"unknown park site kind {k!r}")
    if kind == StopKind.ATTACH.value:
        return ATTACH
    raise FormatError(f"unknown stop kind {kind!r}")


def solution_to_dict(inst: ProblemInstance, sol: Solution, complete: bool = None) -> Dict[str, Any]:
    if complete is None:
        totals = sol.delivered_totals()
        complete = not sol.unserved and all(totals.get(i, 0) == c.demand for i, c in enumerate(inst.customers))
    routes = []
    total = 0
    for route in sol.routes:
        ev = evaluate_route(inst, route)
        sched = ev.schedule
        total += ev.cost
        stops = []
        for j, stop in enumerate(route.stops):
            rec = _stop_to_dict(stop)
            rec["arrival"] = sched.arrival[j]
            rec["service_start"] = sched.service_start[j]
            rec["departure"] = sched.departure[j]
            stops.append(rec)
        routes.append({
            "vehicle": route.vehicle,
            "departure": sched.start_time,
            "return_time": sched.return_time,
            "cost": ev.cost,
            "soft_violations": ev.soft_violations,
            "stops": stops,
        })
    return {
        "format": FORMAT,
        "instance": inst.name,
        "complete": bool(complete),
        "cost": total,
        "routes": routes,
        "unserved": [{"customer": c, "remaining": q} for c, q in sol.unserved],
    }


def solution_from_dict(doc: Dict[str, Any]) -> Solution:
    _check_format(doc, "solution")
    try:
        routes = tuple(
            Route(
                int(r["vehicle"]),
                tuple(_stop_from_dict(s) for s in r["stops"]),
                None if r.get("departure") is None else int(r["departure"]),
            )
            for r in doc["routes"]
        )
        unserved = tuple((int(u["customer"]), int(u["remaining"])) for u in doc.get("unserved", []))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"solution: missing or malformed field {exc}") from exc
    return Solution(routes, unserved)


# ---------------------------------------------------------------------------
# files

def dumps(doc: Dict[str, Any]) -> str:
    return json.dumps(doc, indent=2) + "\n"


def write_json(path: Union[str, Path], doc: Dict[str, Any]) -> None:
    Path(path).write_text(dumps(doc))


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    return json.loads(Path(path).read_text())


def load_instance(path: Union[str, Path]) -> ProblemInstance:
    return instance_from_dict(read_json(path))


def save_instance(path: Union[str, Path], inst: ProblemInstance) -> None:
    write_json(path, instance_to_dict(inst))


def load_solution(path: Union[str, Path]) -> Solution:
    return solution_from_dict(read_json(path))


def save_solution(path: Union[str, Path], inst: ProblemInstance, sol: Solution, complete: bool = None) -> None:
    write_json(path, solution_to_dict(inst, sol, complete))
