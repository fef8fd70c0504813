"""Benchmark the compiled kernel against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--trials N]

Runs the same seeded workloads under both backends and prints wall times plus
the speedup. Results are asserted identical before timing is reported.
"""

import argparse
import json
import time

from gossiplab import engine
from gossiplab._kernels import get_backend
from gossiplab.engine import TrialConfig, run_trials
from gossiplab.graphs import SelectionMatrix
from gossiplab.process import Schedule

K3 = SelectionMatrix.complete_uniform(3)

WORKLOADS = [
    ("dependent float, horizon 10k", TrialConfig(
        matrix=K3, model="dependent",
        sched_plus=Schedule.constant(0.5), sched_minus=Schedule.constant(0.5),
        x0="extremal-01", horizon=10_000, consensus_threshold=1e-300)),
    ("independent float, horizon 10k", TrialConfig(
        matrix=K3, model="independent",
        sched_plus=Schedule.constant(0.8), sched_minus=Schedule.constant(0.4),
        x0="extremal-01", horizon=10_000, consensus_threshold=1e-300)),
    ("dependent dyadic, horizon 10k", TrialConfig(
        matrix=K3, model="dependent",
        sched_plus=Schedule.constant(0.5), sched_minus=Schedule.constant(0.5),
        x0="random-dyadic", horizon=10_000, arithmetic="dyadic")),
]


def run(backend, cfg, trials):
    t0 = time.perf_counter()
    results = run_trials(cfg, trials, 4242, backend=backend)
    dt = time.perf_counter() - t0
    summary = json.dumps(engine.aggregate(results).to_json(), sort_keys=True)
    return dt, summary


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=100)
    args = parser.parse_args()

    try:
        get_backend("compiled")
    except RuntimeError:
        print("compiled kernel unavailable; nothing to compare")
        return

    print(f"{'workload':36s} {'compiled':>10s} {'reference':>10s} {'speedup':>8s}")
    for name, cfg in WORKLOADS:
        fast_t, fast_s = run("compiled", cfg, args.trials)
        slow_t, slow_s = run("reference", cfg, args.trials)
        assert fast_s == slow_s, f"backend mismatch on {name}"
        print(f"{name:36s} {fast_t:9.2f}s {slow_t:9.2f}s {slow_t / fast_t:7.1f}x")


if __name__ == "__main__":
    main()
