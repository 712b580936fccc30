# Leaving the trailer behind
#
# A truck-only customer cannot be reached while towing.  A truck+trailer
# vehicle can still serve it: park the trailer (at a transshipment site or
# at a customer it just served), move goods into the truck, do the
# truck-only part, come back and reattach.

from sdttrp import Customer, Location, ProblemInstance, Route, Solution, TransshipmentPoint, Vehicle
from sdttrp import evaluate_route, validate_solution
from sdttrp.model import ATTACH, park_at_customer, park_at_transshipment, visit

DAY = 24 * 3600


def cust(i, x, y, demand, truck_only=False):
    return Customer(i, Location(x, y), demand, 0, DAY, DAY, 300, 6, truck_only, frozenset({0}))


inst = ProblemInstance(
    depot=Location(0, 0),
    customers=(cust(0, 4000, 0, 60), cust(1, 4000, 3000, 30, truck_only=True), cust(2, 0, 4000, 40)),
    vehicles=(Vehicle(0, truck_capacity=50, trailer_capacity=100, fixed_cost=12000, cost_per_meter=0.2, speed=8.0),),
    transshipments=(TransshipmentPoint(0, Location(3000, 1000)),),
    trailer_park_time=600,
    load_transfer_time_per_unit=3,
)

# Visiting customer 1 with the trailer attached is rejected.
towing = Route(0, (visit(0, 60), visit(1, 30), visit(2, 40)))
print("\n".join(validate_solution(inst, Solution((towing,)))))

# Park at the customer just served, then at the transshipment site.
for label, park in (("park at customer 0", park_at_customer(0)), ("park at site 0", park_at_transshipment(0))):
    if park.park_site.kind == "customer":
        stops = (visit(0, 60), park, visit(1, 30), ATTACH, visit(2, 40))
    else:
        stops = (park, visit(1, 30), ATTACH, visit(0, 60), visit(2, 40))
    route = Route(0, stops)
    ev = evaluate_route(inst, route)
    ok = validate_solution(inst, Solution((route,))) == []
    print(f"{label:20s} feasible {ok}  distance {ev.distance} m  cost {ev.cost}  back at {ev.schedule.return_time} s")

# The truck alone carries the parked segment's load, so 30 units must fit
# in its 50-unit body.  Push it over and the validator says so.
heavy = inst.replace(customers=(inst.customers[0], cust(1, 4000, 3000, 55, truck_only=True), inst.customers[2]))
route = Route(0, (visit(0, 60), park_at_customer(0), visit(1, 55), ATTACH, visit(2, 40)))
print("\n".join(validate_solution(heavy, Solution((route,)))))
