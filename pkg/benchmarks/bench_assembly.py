#!/usr/bin/env python3
"""Time the two implementations of the assembly hot path.

The per-cell quadrature accumulation and the triplet scatter exist as a
numba ``@njit`` fast path and a plain-numpy fallback (selected at import
time via ``GRAPHSL_NUMBA``); both are importable side by side, produce
bitwise-identical triplets, and are timed here on a synthetic batch shaped
like one large meshed edge.  Jit compilation runs in a warmup pass and is
excluded from every measurement.

    python benchmarks/bench_assembly.py --cells 200000 --repeats 9
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from graphsl import _kernels


def synthetic_batch(cells: int, quad: int, seed: int):
    rng = np.random.default_rng(seed)
    cell_idx = np.repeat(np.arange(cells, dtype=np.int64), quad)
    tloc = np.tile(np.linspace(0.05, 0.95, quad), cells)
    wq = rng.uniform(0.01, 0.05, size=cells * quad)
    pv = rng.uniform(0.5, 2.0, size=cells * quad)
    qv = rng.normal(size=cells * quad)
    wv = rng.uniform(0.5, 2.0, size=cells * quad)
    hcell = rng.uniform(0.05, 0.2, size=cells)
    d0 = np.arange(cells, dtype=np.int64)
    d1 = d0 + 1
    d0[0] = -1
    d1[-1] = -1
    return cell_idx, tloc, wq, pv, qv, wv, hcell, d0, d1


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cells", type=int, default=200_000, help="cells in the batch")
    parser.add_argument("--quad", type=int, default=4, help="quadrature samples per cell")
    parser.add_argument("--repeats", type=int, default=9, help="timed repeats (best-of)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    cell_idx, tloc, wq, pv, qv, wv, hcell, d0, d1 = synthetic_batch(
        args.cells, args.quad, args.seed
    )
    ncells = len(hcell)

    variants = [("active/" + _kernels.backend(), _kernels.accumulate, _kernels.triplets)]
    if _kernels.backend() != "numpy":
        variants.append(("numpy", _kernels.accumulate_numpy, _kernels.triplets_numpy))
    else:
        print("numba backend unavailable or disabled; timing the numpy path only")

    # warmup (jit compilation and first-touch allocations) excluded from timing
    results = {}
    for name, accumulate, triplets in variants:
        acc = accumulate(cell_idx, tloc, wq, pv, qv, wv, ncells)
        tri = triplets(d0, d1, hcell, *[np.asarray(a) for a in acc])
        results[name] = tri

    reference = None
    for name, tri in results.items():
        if reference is None:
            reference = tri
            continue
        for a, b in zip(reference, tri):
            if not np.array_equal(np.asarray(a), np.asarray(b)):
                raise SystemExit(f"kernel paths disagree; refusing to time ({name})")

    print(f"batch: {args.cells} cells x {args.quad} samples, best of {args.repeats}")
    timings = {}
    for name, accumulate, triplets in variants:

        def run(accumulate=accumulate, triplets=triplets):
            acc = accumulate(cell_idx, tloc, wq, pv, qv, wv, ncells)
            triplets(d0, d1, hcell, *[np.asarray(a) for a in acc])

        timings[name] = best_of(run, args.repeats)
        rate = args.cells / timings[name] / 1e6
        print(f"  {name:<16} {timings[name] * 1e3:8.2f} ms   {rate:6.1f} Mcells/s")

    if len(timings) == 2:
        names = list(timings)
        ratio = timings[names[1]] / timings[names[0]]
        print(f"  speedup {names[0]} over {names[1]}: {ratio:.2f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
