"""Time the mutex and reachability kernels on each backend.

Usage: python3 benchmarks/bench_kernels.py [--locations 6] [--packages 4] [--repeat 5]

The task is a generated logistics instance (one truck, a ring of
locations).  The numba rows include a warm-up call so they report steady
state, with the one-off compile/load time shown separately.
"""

from __future__ import annotations

import argparse
import statistics
import time
from pathlib import Path

from tagplan.mutex import compute_mutex_facts
from tagplan.pddl import load_task
from tagplan.reachability import Reachability

DOMAIN = Path(__file__).resolve().parent.parent / "tasks" / "logistics-domain.pddl"


def make_problem(n_loc: int, n_pkg: int) -> str:
    locs = [f"l{i}" for i in range(n_loc)]
    pkgs = [f"p{i}" for i in range(n_pkg)]
    roads = " ".join(f"(road {locs[i]} {locs[(i + 1) % n_loc]}) (road {locs[(i + 1) % n_loc]} {locs[i]})"
                     for i in range(n_loc))
    init = " ".join(f"(at {p} {locs[i % n_loc]})" for i, p in enumerate(pkgs))
    goal = " ".join(f"(at {p} {locs[(i + n_loc // 2) % n_loc]})" for i, p in enumerate(pkgs))
    return (f"(define (problem ring) (:domain mini-logistics)"
            f" (:objects t1 - truck {' '.join(pkgs)} - package {' '.join(locs)} - location)"
            f" (:init (at t1 l0) {init} {roads}) (:goal (and {goal})))")


def timed(fn, repeat: int) -> tuple[float, float]:
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return statistics.fmean(out), statistics.pstdev(out)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--locations", type=int, default=6)
    ap.add_argument("--packages", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    task = load_task(DOMAIN.read_text(), make_problem(args.locations, args.packages), prune_mutex=False)
    print(f"task: {task.n_facts} facts, {len(task.actions)} actions")

    backends = ["numpy", "loops"]
    try:
        import numba  # noqa: F401
        backends.append("numba")
    except ImportError:
        print("numba not installed; skipping the compiled rows")

    print("\nmutex facts")
    for b in backends:
        name = None if b == "numpy" else b
        if b == "numba":
            t0 = time.perf_counter()
            compute_mutex_facts(task.init_facts, task.actions, task.n_facts, backend=name)
            print(f"  numba first call (compile or cache load): {1000 * (time.perf_counter() - t0):.1f} ms")
        m, s = timed(lambda: compute_mutex_facts(task.init_facts, task.actions, task.n_facts,
                                                 backend=name or "python"), args.repeat)
        print(f"  {b:6s} {1000 * m:9.2f} ms  +/- {1000 * s:.2f}")

    print("\nreachability from init")
    for b in ["python", "loops"] + (["numba"] if "numba" in backends else []):
        reach = Reachability(task, backend=b)
        if b == "numba":
            t0 = time.perf_counter()
            reach.compute(task.init_facts)
            print(f"  numba first call (compile or cache load): {1000 * (time.perf_counter() - t0):.1f} ms")
        m, s = timed(lambda: reach.compute(task.init_facts), args.repeat)
        print(f"  {b:6s} {1000 * m:9.2f} ms  +/- {1000 * s:.2f}")


if __name__ == "__main__":
    main()
