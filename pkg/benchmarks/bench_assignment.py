"""Time the compiled and pure-Python Hungarian kernels on random square matrices.

    python benchmarks/bench_assignment.py --sizes 6 20 50 --repeats 200
"""
import argparse
import time

import numpy as np

from templex.metrics import _assign_py

try:
    from templex.metrics import _assign
except ImportError:
    _assign = None


def bench(solver, mats, repeats):
    t0 = time.perf_counter()
    for _ in range(repeats):
        for m in mats:
            solver(m)
    return (time.perf_counter() - t0) / (repeats * len(mats))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[6, 20, 50])
    ap.add_argument("--repeats", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>5} {'python_us':>12} {'cython_us':>12} {'speedup':>8}")
    for n in args.sizes:
        mats = [rng.random((n, n)) for _ in range(10)]
        for m in mats:
            if _assign is not None:
                assert np.array_equal(_assign.solve_min(m), _assign_py.solve_min(m))
        reps = max(1, args.repeats // max(1, n // 10))
        py = bench(_assign_py.solve_min, mats, reps)
        if _assign is None:
            print(f"{n:>5} {py * 1e6:12.1f} {'n/a':>12} {'n/a':>8}")
            continue
        cy = bench(_assign.solve_min, mats, reps)
        print(f"{n:>5} {py * 1e6:12.1f} {cy * 1e6:12.1f} {py / cy:8.1f}")


if __name__ == "__main__":
    main()
