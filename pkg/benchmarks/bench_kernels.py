"""Benchmark the compiled census kernel against the pure-numpy fallback.

Runs the same seeded simulation through both backends at several admission
scales and prints a timing table. The compiled path is warmed up first so
JIT compilation is not counted.

Usage: python benchmarks/bench_kernels.py [--reps 5]
"""

import argparse
import time

import numpy as np

from wardflow import backends, model, synthetic


def run_once(params, admissions, init_counts, seed):
    rng = np.random.default_rng(seed)
    return model.simulate_census(params, admissions, init_counts=init_counts, rng=rng)


def best_time(fn, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--reps", type=int, default=5, help="repetitions per cell (min is reported)")
    args = parser.parse_args()

    params = synthetic.default_truth_params()
    cases = []
    for multiplier in (1, 3, 9, 30):
        admissions = synthetic.wave_admissions(90, multiplier=min(multiplier, 9))
        if multiplier > 9:
            admissions = admissions * (multiplier // 9)
        init_counts = synthetic.default_init_counts(min(multiplier, 9))
        cases.append((multiplier, int(admissions.sum()), admissions, init_counts))

    available = ["numpy"]
    try:
        import numba  # noqa: F401

        available.insert(0, "numba")
    except ImportError:
        print("numba not importable; benchmarking the numpy fallback only")

    # Warm-up (includes JIT compilation for the numba backend).
    for name in available:
        backends.use(name)
        run_once(params, cases[0][2], cases[0][3], seed=0)

    print(f"{'patients':>10} " + " ".join(f"{name + ' (ms)':>14}" for name in available)
          + ("  speedup" if len(available) == 2 else ""))
    for multiplier, total, admissions, init_counts in cases:
        cells = {}
        for name in available:
            backends.use(name)
            cells[name] = best_time(lambda: run_once(params, admissions, init_counts, seed=1), args.reps)
        row = f"{total:>10} " + " ".join(f"{1e3 * cells[name]:>14.3f}" for name in available)
        if len(available) == 2:
            row += f"  {cells['numpy'] / cells['numba']:>6.1f}x"
        print(row)
    backends.use(None)


if __name__ == "__main__":
    main()
