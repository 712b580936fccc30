# Greedy against tabu over a week of synthetic days
#
# Seven generated instances, one row each, then the mean improvement.  The
# step cap keeps this reproducible; swap in time_limit for anytime runs.

from sdttrp import GenConfig, generate
from sdttrp.cli import SolveOptions, bench_table, solve_instance

rows = []
for day in range(7):
    n = 20 + 5 * day
    inst = generate(GenConfig(n_customers=n, n_vehicles=n // 2 + 2, seed=100 + day))
    outcome = solve_instance(inst, SolveOptions(seed=day, steps=1500))
    row = dict(outcome.report, instance=f"day {day + 1} (n={n})")
    row["status"] = "ok" if outcome.complete else "infeasible"
    rows.append(row)

text, _ = bench_table(rows)
print(text)

# The same table comes out of the command line:
#   sdttrp bench --generate 7 --sizes 20,25,30,35,40,45,50 --steps 1500 --csv week.csv
