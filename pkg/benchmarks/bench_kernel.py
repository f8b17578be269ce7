"""Compare the compiled stepping kernel with the pure-Python loop.

Usage: python3 benchmarks/bench_kernel.py [--horizon 2.0] [--repeat 3]
"""

import argparse
import time

import numpy as np

from modcoord import _backend
from modcoord.harness.problem import build_problem
from modcoord.harness.scenario import default_scenario


def time_backend(problem, scenario, backend, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        rows, _ = _backend.run_steps(problem, scenario, backend)
        best = min(best, time.perf_counter() - t0)
    return best, rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--horizon", type=float, default=2.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    s = default_scenario().with_options(horizon=args.horizon)
    problem = build_problem(s)
    steps = problem.n_steps
    py_t, py_rows = time_backend(problem, s, "python", args.repeat)
    print(f"python    {py_t:8.3f} s  {1e6 * py_t / steps:8.1f} us/step")
    if _backend._kernel is None:
        print("compiled  unavailable")
        return
    c_t, c_rows = time_backend(problem, s, "compiled", args.repeat)
    print(f"compiled  {c_t:8.3f} s  {1e6 * c_t / steps:8.1f} us/step")
    print(f"speedup   {py_t / c_t:8.1f}x   max row difference {np.max(np.abs(py_rows - c_rows)):.2e}")


if __name__ == "__main__":
    main()
