"""
Searching a deployment space
============================

First a synthetic bowl whose minimum is known, to compare the surrogate
with random sampling. Then a grid over the hybrid preset's edge stage,
looking at tail latency and peak CPU load together.
"""

import statistics
from fractions import Fraction

from continuum_lab import build_scenario, optimize_loop
from continuum_lab.optimizer import Objective
from continuum_lab.spec import Discrete, IntRange, ParameterSpace

bowl = ParameterSpace((("a", IntRange(0, 19, 1)), ("b", IntRange(0, 19, 1))))


def f(point, index):
    return [Fraction((point["a"] - 3) ** 2 + (point["b"] - 4) ** 2)]


def hits(strategy, seed, budget=60):
    res = optimize_loop(None, None, bowl, [Objective("e2e_latency_ns")], strategy, budget, seed, evaluate=f)
    found = [e.evaluation_index + 1 for e in res.evaluations if e.objectives[0] == 0]
    return found[0] if found else budget + 1  # unsolved runs count as "more than the budget"


for strategy in ("surrogate", "random"):
    runs = [hits(strategy, seed) for seed in range(30)]
    solved = sum(r <= 60 for r in runs)
    median = statistics.median(runs)
    shown = f"{median:g}" if median <= 60 else "> 60"
    print(f"{strategy:>9}: optimum found in {solved}/30 runs, median evaluations {shown}")

# Multi-objective: latency against edge CPU load on the hybrid preset.
spec = build_scenario("hybrid", n_records=20, period_ns=2_000_000_000)
space = ParameterSpace((
    ("preprocess.factor", Discrete((Fraction(1, 20), Fraction(1, 10), Fraction(1, 4), Fraction(1, 2), Fraction(1)))),
    ("preprocess.base_units", Discrete((1, 2, 5, 10))),
))
objectives = [Objective("e2e_latency_ns", "minimize", "p95"), Objective("cpu_utilization", "minimize", "max")]
result = optimize_loop(spec, None, space, objectives, "grid", 20, 0)
# Here the two objectives agree (less edge work and smaller records are
# better on both), so the Pareto set collapses to a single configuration.
print()
print(f"Pareto set of {len(result.evaluations)} configurations "
      "(factor, edge units) -> p95 latency ms, peak utilization")
for e in result.pareto:
    lat, util = e.objectives
    print(f"  ({e.point['preprocess.factor']}, {e.point['preprocess.base_units']}) -> "
          f"{float(lat) / 1e6:7.1f}, {float(util):.3f}")
print("correlations:", {k: {m: round(v, 3) if v is not None else None for m, v in row.items()}
                        for k, row in result.correlations.items()})
