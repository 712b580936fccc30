import dataclasses
import json
import subprocess
import sys

import pytest

from sdttrp import io
from sdttrp.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, EXIT_USAGE, SolveOptions, bench_table, main, solve_instance
from sdttrp.model import Route, Solution, Vehicle, visit
from support import customer, generated, greedy_solution, make_instance


def fields(inst):
    return {f.name: getattr(inst, f.name) for f in dataclasses.fields(inst)}


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# --- file formats ---------------------------------------------------------------------

def test_instance_round_trip():
    for seed in range(20):
        inst = generated(seed, n=seed * 2)
        doc = io.instance_to_dict(inst)
        assert doc["format"] == io.FORMAT
        back = io.instance_from_dict(json.loads(io.dumps(doc)))
        assert fields(back) == fields(inst)


def test_solution_round_trip_keeps_every_stop():
    seen_parks = 0
    for seed in range(40):
        inst = generated(seed, n=20)
        sol = greedy_solution(inst, seed)
        if sol is None:
            continue
        doc = io.solution_to_dict(inst, sol, complete=True)
        back = io.solution_from_dict(json.loads(io.dumps(doc)))
        assert [r.stops for r in back.routes] == [r.stops for r in sol.routes]
        assert [r.departure or inst.day_start for r in back.routes] == [r.departure or inst.day_start for r in sol.routes]
        assert doc["cost"] == sum(r["cost"] for r in doc["routes"])
        seen_parks += sum(1 for r in doc["routes"] for s in r["stops"] if s["kind"] == "park_trailer")
    assert seen_parks > 0


@pytest.mark.parametrize("doc", [
    {}, {"format": "other"}, {"format": io.FORMAT, "routes": [{"vehicle": 0, "stops": [{"kind": "fly"}]}]},
    {"format": io.FORMAT, "routes": [{"vehicle": 0, "stops": [{"kind": "park", "park_site": {"moon": 1}}]}]},
])
def test_malformed_solutions_raise_format_error(doc):
    with pytest.raises(io.FormatError):
        io.solution_from_dict(doc)


def test_malformed_instance_raises_format_error():
    with pytest.raises(io.FormatError):
        io.instance_from_dict({"format": io.FORMAT, "customers": [{"id": 0}]})


# --- generate ---------------------------------------------------------------------

def test_generate_writes_a_valid_file(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "generate", "--n", 20, "--seed", 7, "--out", a)[0] == EXIT_OK
    assert run(capsys, "--seed", 7, "--out", b, "generate", "--n", 20)[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    inst = io.load_instance(a)
    assert inst.n == 20


def test_negative_count_is_a_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["generate", "--n", "-1"])
    assert info.value.code == EXIT_USAGE


def test_unreadable_instance_is_a_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    code, _, err = run(capsys, "solve", bad)
    assert code == EXIT_USAGE and "cannot read instance" in err


# --- solve --------------------------------------------------------------------

def test_single_customer_solve(tmp_path, capsys):
    path = tmp_path / "one.json"
    io.save_instance(path, make_instance([customer(0, 1200, 300)], [Vehicle(0, 50)]))
    code, out, _ = run(capsys, "solve", path, "--quiet")
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["improvement"] == 0 and report["feasibility"] is True
    doc = io.read_json(tmp_path / "one.solution.json")
    assert doc["complete"] is True and len(doc["routes"]) == 1


def test_repeated_solves_are_identical(tmp_path, capsys):
    inst_path = tmp_path / "i.json"
    run(capsys, "generate", "--n", 20, "--seed", 3, "--out", inst_path)
    outputs = []
    for k in range(2):
        sol, rep = tmp_path / f"s{k}.json", tmp_path / f"r{k}.json"
        code, out, _ = run(capsys, "solve", inst_path, "--steps", 300, "--seed", 5, "--out", sol, "--report", rep)
        assert code == EXIT_OK
        outputs.append((sol.read_bytes(), rep.read_bytes(), out))
    assert outputs[0] == outputs[1]
    report = json.loads(outputs[0][2])
    assert report["improvement"] <= 0 and report["wall_time"] is None


def test_greedy_only_reports_no_improvement():
    inst = generated(8, n=15)
    outcome = solve_instance(inst, SolveOptions(greedy_only=True, seed=1))
    assert outcome.report["greedy_cost"] == outcome.report["tabu_cost"]
    assert outcome.report["iterations"] == 0


def test_infeasible_instance_exits_3_with_partial_solution(tmp_path, capsys):
    cs = [customer(0, 1000, 0, allowed=(0,)), customer(1, 2000, 0, truck_only=True, allowed=(1,))]
    path = tmp_path / "stuck.json"
    io.save_instance(path, make_instance(cs, [Vehicle(0, 50), Vehicle(1, 50, 50)], transshipments=[]))
    code, out, err = run(capsys, "solve", path, "--out", tmp_path / "part.json")
    assert code == EXIT_INFEASIBLE and "fleet exhausted" in err
    doc = io.read_json(tmp_path / "part.json")
    assert doc["complete"] is False
    assert doc["unserved"] == [{"customer": 1, "remaining": 10}]


# --- validate -------------------------------------------------------------------

def test_validate_accepts_solver_output_and_rejects_corruption(tmp_path, capsys):
    inst_path, sol_path = tmp_path / "i.json", tmp_path / "s.json"
    run(capsys, "generate", "--n", 12, "--seed", 21, "--out", inst_path)
    assert run(capsys, "solve", inst_path, "--steps", 200, "--out", sol_path)[0] == EXIT_OK
    code, out, _ = run(capsys, "validate", inst_path, sol_path)
    assert code == EXIT_OK and out.strip() == "OK"

    doc = io.read_json(sol_path)
    stop = next(s for r in doc["routes"] for s in r["stops"] if s["kind"] == "visit")
    stop["delivered"] += 1
    io.write_json(sol_path, doc)
    code, out, _ = run(capsys, "validate", inst_path, sol_path)
    assert code == EXIT_INVALID and "demand mismatch" in out


def test_validate_names_the_truck_only_rule(tmp_path, capsys):
    cs = [customer(0, 1000, 0, truck_only=True), customer(1, 0, 1000)]
    inst = make_instance(cs, [Vehicle(0, 50, 50)])
    inst_path, sol_path = tmp_path / "i.json", tmp_path / "s.json"
    io.save_instance(inst_path, inst)
    io.save_solution(sol_path, inst, Solution((Route(0, (visit(0, 10), visit(1, 10))),)))
    code, out, _ = run(capsys, "validate", inst_path, sol_path)
    assert code == EXIT_INVALID and "truck-only" in out


# --- bench ----------------------------------------------------------------------

def test_bench_seven_generated_rows_and_summary(tmp_path, capsys):
    csv_a, csv_b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["bench", "--generate", 7, "--sizes", "6,8,10", "--steps", 150, "--quiet"]
    code, out, _ = run(capsys, *args, "--csv", csv_a)
    assert code == EXIT_OK
    lines = csv_a.read_text().splitlines()
    assert len(lines) == 1 + 7 + 1 and lines[-1].startswith("mean,")
    assert out.count("\n") == 1 + 7 + 1 + 1   # header, rows, rule, summary
    run(capsys, *args, "--csv", csv_b)
    assert csv_a.read_bytes() == csv_b.read_bytes()


def test_bench_empty_list_prints_header_only(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--csv", tmp_path / "e.csv")
    assert code == EXIT_OK
    assert out.splitlines() == [out.splitlines()[0]] and out.startswith("instance")
    assert (tmp_path / "e.csv").read_text().count("\n") == 1


def test_bench_marks_a_broken_file_and_exits_with_its_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("[]")
    code, out, _ = run(capsys, "bench", bad, "--generate", 1, "--sizes", "5", "--steps", 50, "--quiet")
    assert code == EXIT_USAGE
    assert "error" in out and "1/2 ok" in out


def test_bench_summary_mean():
    rows = [{"instance": "a", "improvement": -0.1, "status": "ok"},
            {"instance": "b", "improvement": 0.0, "status": "ok"},
            {"instance": "c", "status": "error"}]
    text, csv_text = bench_table(rows)
    assert csv_text.splitlines()[-1].startswith("mean,,,,-0.050000")
    assert "2/3 ok" in text


def test_module_entry_point(tmp_path):
    out = tmp_path / "g.json"
    proc = subprocess.run([sys.executable, "-m", "sdttrp", "generate", "--n", "3", "--out", str(out), "--quiet"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert io.load_instance(out).n == 3
