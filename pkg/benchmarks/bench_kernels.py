"""Time the equilibrium and makespan kernels on both backends.

    python benchmarks/bench_kernels.py --n 10 --m 4 --repeat 3

The first numba call compiles (or loads the on-disk cache) and is timed
separately. Both backends must return identical index sets.
"""

import argparse
import time

import numpy as np

from coordmech import kernels
from coordmech.instance import generate_instance


def timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10)
    ap.add_argument("--m", type=int, default=4)
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    inst = generate_instance("uniform-integer", args.n, args.m, args.seed)
    opts, counts = kernels.option_table(inst.options)
    W = inst.int_weights.astype(np.int64)
    size = kernels.space_size(counts)
    print(f"n={args.n} m={args.m} d={args.d}: {size} assignments")

    backends = ["numpy"]
    if kernels.NUMBA_AVAILABLE:
        backends.append("numba")
        t0 = time.perf_counter()
        kernels.equilibrium_indices(W[:1], opts[:1], counts[:1], args.d, "dcoord", backend="numba")
        kernels.min_makespan(W[:1], opts[:1], counts[:1], backend="numba")
        print(f"numba warm-up {time.perf_counter() - t0:.2f}s")
    else:
        print("numba not importable, timing the numpy backend only")

    results = {}
    for kind in ("dcoord", "ccoord", "makespan"):
        for backend in backends:
            secs, idx = timed(lambda: kernels.equilibrium_indices(W, opts, counts, args.d, kind, backend=backend),
                              args.repeat)
            results[kind, backend] = idx
            print(f"equilibria {kind:<9} {backend:<6} {secs:8.3f}s  {size / secs / 1e6:7.2f} M assignments/s"
                  f"  ({len(idx)} equilibria)")
        if len(backends) == 2:
            assert np.array_equal(results[kind, "numpy"], results[kind, "numba"]), kind

    for backend in backends:
        secs, (val, idx) = timed(lambda: kernels.min_makespan(W, opts, counts, backend=backend), args.repeat)
        print(f"min makespan         {backend:<6} {secs:8.3f}s  value {val} at index {idx}")


if __name__ == "__main__":
    main()
