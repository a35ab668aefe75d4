"""Compare the compiled and pure-numpy nearest-neighbor backends.

Times query_topk on synthetic workloads shaped like the two hot paths:
the per-sample base-model lookup (1 query against the validation reference
set) and the batch kernel expansion (many queries).  Verifies that both
backends return identical results before timing.

Run from the repository root:

    python benchmarks/compare_backends.py
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from capgest import _neighbors_np

try:
    from capgest import _neighbors_cy
except ImportError:
    _neighbors_cy = None


def time_call(fn, repeats):
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return statistics.median(timings)


def run_case(name, n_refs, n_queries, dim, k, repeats):
    rng = np.random.default_rng(0)
    refs = rng.normal(0, 1, (n_refs, dim))
    queries = rng.normal(0, 1, (n_queries, dim))

    d_np, i_np = _neighbors_np.query_topk(refs, queries, k)
    row = f"{name:<28} n={n_refs:<6} q={n_queries:<5} d={dim:<3} k={k:<4}"
    t_np = time_call(lambda: _neighbors_np.query_topk(refs, queries, k), repeats)
    if _neighbors_cy is None:
        print(f"{row} numpy {t_np * 1e3:8.3f} ms   cython (not built)")
        return
    d_cy, i_cy = _neighbors_cy.query_topk(refs, queries, k)
    assert np.array_equal(i_np, i_cy) and np.allclose(d_np, d_cy), name
    t_cy = time_call(lambda: _neighbors_cy.query_topk(refs, queries, k), repeats)
    print(
        f"{row} numpy {t_np * 1e3:8.3f} ms   cython {t_cy * 1e3:8.3f} ms   "
        f"speedup {t_np / t_cy:5.2f}x"
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20, help="timing repeats (median)")
    args = parser.parse_args()

    print(f"compiled backend available: {_neighbors_cy is not None}\n")
    cases = [
        ("single-sample base lookup", 6000, 1, 3, 5, args.repeats),
        ("single-sample, wide", 6000, 1, 20, 5, args.repeats),
        ("batch base lookup", 6000, 2000, 3, 5, max(3, args.repeats // 4)),
        ("kernel expansion (k=100)", 3000, 500, 10, 100, max(3, args.repeats // 4)),
        ("small reference set", 300, 100, 9, 10, args.repeats),
    ]
    for case in cases:
        run_case(*case)


if __name__ == "__main__":
    main()
