# A first day of deliveries
#
# We generate a seeded instance, build a greedy plan, improve it with the
# tabu search and look at what changed.  Everything is integer: seconds,
# load units and cents.

import numpy as np

from sdttrp import GenConfig, GreedyParams, TabuParams, build_initial_solution, generate, run
from sdttrp import evaluate_route, solution_cost, validate_solution

inst = generate(GenConfig(n_customers=25, n_vehicles=14, seed=11))
print(inst.name, "-", inst.n, "customers,", len(inst.vehicles), "vehicles,",
      len(inst.transshipments), "trailer parking sites")

# Which vehicles each customer accepts varies; a few are truck-only.
sizes = np.array([len(c.allowed_vehicles) for c in inst.customers])
print("allowed vehicles per customer: min", sizes.min(), "mean", round(sizes.mean(), 1))
print("truck-only customers:", sum(c.truck_only for c in inst.customers))

# Greedy construction.  mu is how many of the farthest customers compete
# to seed each new route.
greedy = build_initial_solution(inst, GreedyParams(mu=3, rng_seed=11))
print("\ngreedy:", len(greedy.routes), "routes, cost", solution_cost(inst, greedy),
      "unserved", list(greedy.unserved))

# Tabu search: relocate one visit per step inside a corridor of tolerated
# infeasibility, repairing every 25 applied moves.
result = run(inst, greedy, TabuParams(step_limit=2000, seed=11))
print("tabu:  ", len(result.best.routes), "routes, cost", result.best_cost,
      f"({(result.best_cost - result.initial_cost) / result.initial_cost:+.1%})")
print("steps", result.iterations, "applied moves", result.applied_moves,
      "recoveries", result.recoveries)

# The validator is independent of the evaluator used during search.
assert validate_solution(inst, result.best) == []

# Each route, with its timing.
for route in result.best.routes:
    ev = evaluate_route(inst, route)
    s = ev.schedule
    kinds = "".join({"visit": "v", "park_trailer": "P", "attach_trailer": "A"}[st.kind.value]
                    for st in route.stops)
    print(f"vehicle {route.vehicle:2d}  {kinds:12s} load {ev.load:3d}  "
          f"out {s.start_time // 3600:02d}:{s.start_time % 3600 // 60:02d}  "
          f"back {s.return_time // 3600:02d}:{s.return_time % 3600 // 60:02d}  cost {ev.cost}")
