"""Truck-and-trailer vehicle routing with hard and soft time windows, split
deliveries and site-dependent fleets: greedy construction, a corridor
controlled tabu search, repair procedures, an instance generator and an
independent solution validator."""

from .evaluate import (
    RouteEval,
    deletion_cost,
    evaluate_route,
    insertion_cost,
    is_feasible,
    solution_cost,
)
from .greedy import GreedyParams, build_initial_solution, draw_violation_allowance, maybe_allow_split
from .instgen import GenConfig, generate
from .model import (
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
    validate_instance,
    validate_solution,
)
from .recovery import FleetExhausted, RecoveryFailed, recovery_pipeline
from .tabu import CorridorState, TabuParams, TabuResult, improve, run

__version__ = "0.1.0"

__all__ = [
    "Customer", "Location", "ParkSite", "ProblemInstance", "Route", "Solution", "Stop", "StopKind",
    "TransshipmentPoint", "Vehicle", "validate_instance", "validate_solution",
    "RouteEval", "evaluate_route", "insertion_cost", "deletion_cost", "solution_cost", "is_feasible",
    "GreedyParams", "build_initial_solution", "draw_violation_allowance", "maybe_allow_split",
    "CorridorState", "TabuParams", "TabuResult", "improve", "run",
    "RecoveryFailed", "FleetExhausted", "recovery_pipeline",
    "GenConfig", "generate",
]
