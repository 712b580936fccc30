"""Command line: ``sdttrp generate | solve | validate | bench``.

Exit codes: 0 ok, 1 validation failure, 2 usage or unreadable input,
3 infeasible (fleet exhausted; the partial solution is still written with
``"complete": false``), 4 internal error.

``--steps`` runs are byte-reproducible: the report's ``wall_time`` is null
unless ``--timing`` is given.  ``--time-limit`` runs check the clock between
steps only.  Both budgets are totals shared evenly by the restarts.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from . import io
from .evaluate import solution_cost
from .greedy import GreedyParams, build_initial_solution
from .instgen import GenConfig, generate
from .model import ProblemInstance, Solution, validate_instance, validate_solution
from .rng import derive_seed
from .tabu import TabuParams, default_corridor, run

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 1, 2, 3, 4

DEFAULT_STEPS = 2000
DEFAULT_RESTARTS = 5


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class SolveOptions:
    seed: int = 0
    steps: Optional[int] = None
    time_limit: Optional[float] = None
    greedy_only: bool = False
    mu: int = 3
    soft_budget: Optional[int] = None
    split_budget: Optional[int] = None
    closeness: float = 3600.0
    corridor_delays: Optional[int] = None
    corridor_overcap: Optional[int] = None
    corridor_cost: Optional[float] = None
    feasibility_period: int = 25
    stall_limit: int = 1500
    tabu_tenure: int = 3
    greedy_attempts: int = 10
    restarts: int = DEFAULT_RESTARTS
    timing: bool = False


@dataclass
class SolveOutcome:
    solution: Solution
    report: Dict[str, Any]
    complete: bool
    exit_code: int
    message: str = ""


def _greedy(inst: ProblemInstance, opts: SolveOptions, restart: int) -> Tuple[Solution, int]:
    """First complete greedy solution over the attempt seeds, else the least incomplete."""
    fallback = None
    for attempt in range(opts.greedy_attempts):
        seed = derive_seed(opts.seed, restart, attempt) if (restart or attempt) else opts.seed
        sol = build_initial_solution(inst, GreedyParams(mu=opts.mu, rng_seed=seed))
        if not sol.unserved:
            return sol, attempt
        short = sum(q for _, q in sol.unserved)
        if fallback is None or short < fallback[0]:
            fallback = (short, sol)
    return fallback[1], -1


def _improvement(greedy_cost: int, tabu_cost: int) -> float:
    if greedy_cost == 0:
        return 0.0
    return round((tabu_cost - greedy_cost) / greedy_cost, 6)


def _share(total: int, parts: int, k: int) -> int:
    """Part ``k`` of ``total`` split as evenly as possible."""
    return total // parts + (k < total % parts)


def solve_instance(inst: ProblemInstance, opts: SolveOptions) -> SolveOutcome:
    started = time.monotonic()
    overrides = {}
    if opts.soft_budget is not None:
        overrides["soft_violation_budget"] = opts.soft_budget
    if opts.split_budget is not None:
        overrides["split_budget"] = opts.split_budget
    if overrides:
        inst = inst.replace(**overrides)

    steps = opts.steps
    if steps is None:
        steps = 10 ** 12 if opts.time_limit is not None else DEFAULT_STEPS
    per_restart_time = None if opts.time_limit is None else opts.time_limit / opts.restarts

    best = None   # (tabu_cost, solution)
    greedy_best = None
    iterations = 0
    for restart in range(opts.restarts):
        initial, attempt = _greedy(inst, opts, restart)
        if attempt < 0:
            if best is None and restart == opts.restarts - 1:
                cost = solution_cost(inst, initial)
                return SolveOutcome(initial, _report(inst, opts, cost, cost, 0, False, started),
                                    False, EXIT_INFEASIBLE, "fleet exhausted: some demand left unserved")
            continue
        g_cost = solution_cost(inst, initial)
        greedy_best = g_cost if greedy_best is None else min(greedy_best, g_cost)
        if opts.greedy_only or not inst.customers:
            cand, cost = initial, g_cost
        else:
            corridor = None
            given = {k: v for k, v in (("max_excess_delays", opts.corridor_delays),
                                       ("max_overcap_routes", opts.corridor_overcap),
                                       ("max_cost_increase", opts.corridor_cost)) if v is not None}
            if given:
                corridor = replace(default_corridor(inst, initial), **given)
            params = TabuParams(
                closeness=opts.closeness,
                initial_corridor=corridor,
                feasibility_period=opts.feasibility_period,
                stall_limit=opts.stall_limit,
                step_limit=_share(steps, opts.restarts, restart),
                tabu_tenure=opts.tabu_tenure,
                seed=derive_seed(opts.seed, restart) if restart else opts.seed,
                time_limit=per_restart_time,
            )
            result = run(inst, initial, params)
            cand, cost = result.best, result.best_cost
            iterations += result.iterations
        if best is None or cost < best[0]:
            best = (cost, cand)

    cost, sol = best
    problems = validate_solution(inst, sol)
    if problems:
        report = _report(inst, opts, greedy_best, cost, iterations, False, started)
        return SolveOutcome(sol, report, False, EXIT_INTERNAL,
                            "internal error: solver produced an invalid solution: " + "; ".join(problems[:5]))
    report = _report(inst, opts, greedy_best, cost, iterations, True, started)
    return SolveOutcome(sol, report, True, EXIT_OK)


def _report(inst, opts, greedy_cost, tabu_cost, iterations, feasible, started) -> Dict[str, Any]:
    timed = opts.timing or opts.steps is None and opts.time_limit is not None
    return {
        "instance": inst.name,
        "seed": opts.seed,
        "greedy_cost": greedy_cost,
        "tabu_cost": tabu_cost,
        "improvement": _improvement(greedy_cost, tabu_cost),
        "wall_time": round(time.monotonic() - started, 3) if timed else None,
        "iterations": iterations,
        "feasibility": feasible,
    }


# ---------------------------------------------------------------------------
# argument parsing

def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _pos_int(text: str) -> int:
    v = _nonneg_int(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def _fraction(text: str) -> float:
    v = _nonneg_float(text)
    if v > 1:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return v


def _common(suppress: bool) -> argparse.ArgumentParser:
    # Accepted before or after the verb; the verb-level copy only overrides when given.
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=_nonneg_int, default=argparse.SUPPRESS if suppress else 0,
                   help="random seed (default 0)")
    p.add_argument("--out", default=argparse.SUPPRESS if suppress else None, help="output path")
    p.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="no progress messages on stderr")
    return p


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--steps", type=_nonneg_int, help=f"tabu step cap (default {DEFAULT_STEPS} unless --time-limit)")
    g.add_argument("--time-limit", type=_nonneg_float, help="tabu wall-clock limit in seconds")
    g.add_argument("--greedy-only", action="store_true", help="skip the improvement phase")
    g.add_argument("--mu", type=_pos_int, default=3, help="seed drawn among the mu farthest customers (default 3)")
    g.add_argument("--soft-budget", type=_nonneg_int, help="override the instance's soft-violation budget")
    g.add_argument("--split-budget", type=_nonneg_int, help="override the instance's split budget")
    g.add_argument("--closeness", type=_nonneg_float, default=3600.0,
                   help="max travel seconds from a slot neighbour to the customer (default 3600)")
    g.add_argument("--corridor-delays", type=_nonneg_int, help="initial excess-delay allowance (default min(1, v))")
    g.add_argument("--corridor-overcap", type=_nonneg_int,
                   help="initial over-capacity route allowance (default min(1, routes // 2))")
    g.add_argument("--corridor-cost", type=_nonneg_float,
                   help="initial per-move cost-increase allowance in cents (default half the mean arc cost)")
    g.add_argument("--feasibility-period", type=_pos_int, default=25,
                   help="applied moves between recovery runs (default 25)")
    g.add_argument("--stall-limit", type=_pos_int, default=1500, help="steps without a new best (default 1500)")
    g.add_argument("--tabu-tenure", type=_nonneg_int, default=3, help="steps a reversal stays forbidden (default 3)")
    g.add_argument("--greedy-attempts", type=_pos_int, default=10,
                   help="greedy seeds tried until every customer is served (default 10)")
    g.add_argument("--restarts", type=_pos_int, default=DEFAULT_RESTARTS,
                   help="independent greedy+tabu runs sharing the step and time budget "
                        f"(default {DEFAULT_RESTARTS})")
    g.add_argument("--timing", action="store_true", help="report wall_time even in --steps mode")


def _options(args: argparse.Namespace) -> SolveOptions:
    return SolveOptions(
        seed=args.seed, steps=args.steps, time_limit=args.time_limit, greedy_only=args.greedy_only,
        mu=args.mu, soft_budget=args.soft_budget, split_budget=args.split_budget,
        closeness=args.closeness, corridor_delays=args.corridor_delays,
        corridor_overcap=args.corridor_overcap, corridor_cost=args.corridor_cost,
        feasibility_period=args.feasibility_period, stall_limit=args.stall_limit,
        tabu_tenure=args.tabu_tenure, greedy_attempts=args.greedy_attempts,
        restarts=args.restarts, timing=args.timing,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdttrp", parents=[_common(False)],
                                     description="Truck-and-trailer routing with time windows and split deliveries.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    common = _common(True)

    g = sub.add_parser("generate", parents=[common], help="write a seeded random instance")
    g.add_argument("--n", type=_nonneg_int, default=20, help="customers (default 20)")
    g.add_argument("--vehicles", type=_pos_int, help="fleet size (default max(3, n // 2 + 2))")
    g.add_argument("--transshipments", type=_nonneg_int, default=2, help="trailer parking sites (default 2)")
    g.add_argument("--truck-only", type=_fraction, default=0.2, help="truck-only probability (default 0.2)")
    g.add_argument("--site-dependency", type=_fraction, default=0.2,
                   help="probability a customer restricts its vehicles (default 0.2)")
    g.add_argument("--soft-budget", type=_nonneg_int, default=2, help="soft-violation budget (default 2)")
    g.add_argument("--split-budget", type=_nonneg_int, default=1, help="split budget (default 1)")
    g.add_argument("--area", type=_nonneg_float, default=20000.0, help="square side in meters (default 20000)")

    s = sub.add_parser("solve", parents=[common], help="greedy construction then tabu improvement")
    s.add_argument("instance")
    s.add_argument("--report", help="also write the run report to this file")
    _solver_flags(s)

    v = sub.add_parser("validate", parents=[common], help="check a solution file against an instance")
    v.add_argument("instance")
    v.add_argument("solution")

    b = sub.add_parser("bench", parents=[common], help="greedy vs tabu table over many instances")
    b.add_argument("instances", nargs="*", help="instance files")
    b.add_argument("--generate", type=_nonneg_int, default=0, metavar="K",
                   help="also bench K generated instances (seeds seed..seed+K-1)")
    b.add_argument("--sizes", default="10,20,30,40,50",
                   help="comma-separated customer counts cycled through by --generate")
    b.add_argument("--csv", help="write the table as CSV")
    b.add_argument("--jobs", type=_pos_int, default=1, help="worker processes (default 1)")
    _solver_flags(b)
    return parser


# ---------------------------------------------------------------------------
# commands

def _note(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


def _load_instance(path: str) -> ProblemInstance:
    try:
        inst = io.load_instance(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read instance {path}: {exc}")
    problems = validate_instance(inst)
    if problems:
        raise UsageError(f"invalid instance {path}: " + "; ".join(problems[:5]))
    return inst


def cmd_generate(args) -> int:
    n = args.n
    try:
        config = GenConfig(
            n_customers=n,
            n_vehicles=args.vehicles or max(3, n // 2 + 2),
            n_transshipments=args.transshipments,
            truck_only_fraction=args.truck_only,
            site_dependency_fraction=args.site_dependency,
            area_side=args.area,
            soft_violation_budget=args.soft_budget,
            split_budget=args.split_budget,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc))
    text = io.dumps(io.instance_to_dict(generate(config)))
    if args.out:
        Path(args.out).write_text(text)
        _note(args, f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load_instance(args.instance)
    outcome = solve_instance(inst, _options(args))
    out = args.out or str(Path(args.instance).with_suffix("")) + ".solution.json"
    io.save_solution(out, inst, outcome.solution, outcome.complete)
    report_text = json.dumps(outcome.report)
    if args.report:
        Path(args.report).write_text(report_text + "\n")
    print(report_text)
    if outcome.message:
        print(outcome.message, file=sys.stderr)
    _note(args, f"wrote {out}")
    return outcome.exit_code


def cmd_validate(args) -> int:
    inst = _load_instance(args.instance)
    try:
        doc = io.read_json(args.solution)
        sol = io.solution_from_dict(doc)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read solution {args.solution}: {exc}")
    problems = validate_solution(inst, sol)
    if problems:
        for p in problems:
            print(p)
        return EXIT_INVALID
    if not args.quiet:
        print("OK")
    return EXIT_OK


BENCH_COLUMNS = ("instance", "seed", "greedy_cost", "tabu_cost", "improvement", "iterations", "wall_time", "status")


def _bench_one(job) -> Dict[str, Any]:
    label, source, opts, outdir = job
    try:
        inst = io.load_instance(source) if isinstance(source, str) else generate(source)
        if isinstance(source, str) and validate_instance(inst):
            raise UsageError("invalid instance")
        outcome = solve_instance(inst, opts)
        row = dict(outcome.report)
        row["instance"] = label
        row["status"] = {EXIT_OK: "ok", EXIT_INFEASIBLE: "infeasible"}.get(outcome.exit_code, "error")
        row["exit_code"] = outcome.exit_code
        if outcome.exit_code == EXIT_OK and row["tabu_cost"] > row["greedy_cost"]:
            row["status"], row["exit_code"] = "error", EXIT_INTERNAL
        if outdir:
            io.save_solution(Path(outdir) / f"{Path(label).stem}.solution.json", inst,
                             outcome.solution, outcome.complete)
    except UsageError as exc:
        row = {"instance": label, "seed": opts.seed, "status": f"error: {exc}", "exit_code": EXIT_USAGE}
    except (OSError, ValueError) as exc:
        row = {"instance": label, "seed": opts.seed, "status": f"error: {exc}", "exit_code": EXIT_USAGE}
    except Exception as exc:  # reported in the row, reflected in the exit code
        row = {"instance": label, "seed": opts.seed, "status": f"error: {type(exc).__name__}: {exc}",
               "exit_code": EXIT_INTERNAL}
    return row


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def bench_table(rows: Sequence[Dict[str, Any]]) -> Tuple[str, str]:
    """Text table and CSV for bench rows, each ending in a summary line."""
    ok = [r for r in rows if r.get("status") == "ok"]
    summary = None
    if rows:
        mean = round(sum(r["improvement"] for r in ok) / len(ok), 6) if ok else None
        summary = {"instance": "mean", "improvement": mean, "status": f"{len(ok)}/{len(rows)} ok"}
    table_rows = list(rows) + ([summary] if summary else [])

    cells = [list(BENCH_COLUMNS)] + [[_fmt(r.get(c)) for c in BENCH_COLUMNS] for r in table_rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(BENCH_COLUMNS))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in cells]
    if summary:
        lines.insert(len(lines) - 1, "-" * len(lines[0]))
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for r in table_rows:
        writer.writerow(["" if r.get(c) is None else _fmt(r.get(c)) for c in BENCH_COLUMNS])
    return "\n".join(lines) + "\n", buf.getvalue()


def cmd_bench(args) -> int:
    opts = _options(args)
    jobs = [(path, path, opts, args.out) for path in args.instances]
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    if args.generate and (not sizes or min(sizes) < 0):
        raise UsageError("--sizes needs at least one non-negative count")
    base = args.seed
    for k in range(args.generate):
        n = sizes[k % len(sizes)]
        config = GenConfig(n_customers=n, n_vehicles=max(3, n // 2 + 2), seed=base + k)
        jobs.append((f"gen-n{n}-s{base + k}", config, opts, args.out))
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)

    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = []
        for job in jobs:
            rows.append(_bench_one(job))
            _note(args, f"{job[0]}: {rows[-1]['status']}")

    text, csv_text = bench_table(rows)
    sys.stdout.write(text)
    if args.csv:
        Path(args.csv).write_text(csv_text)
    return max([r["exit_code"] for r in rows], default=EXIT_OK)


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "validate": cmd_validate, "bench": cmd_bench}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # exits with status 2 on bad usage
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sdttrp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
