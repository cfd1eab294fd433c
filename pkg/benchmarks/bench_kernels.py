"""Timing comparison of the jit kernels against their pure-numpy twins.

Runs each kernel pair on a representative workload and prints one table
row per kernel: median wall time for both implementations and the speedup.
The numba twin is warmed once before timing so compilation is excluded.

Usage::

    python benchmarks/bench_kernels.py [--repeats 5] [--scale 1.0]
"""

import argparse
import statistics
import timeit

import numpy as np

from l1poison._kernels import HAS_NUMBA
from l1poison.model import GroupPartition
from l1poison.projections import project_l1
from l1poison.reference import bcd_group_lasso, cd_lasso, fista_sparse_group


def workloads(scale):
    rng = np.random.default_rng(0)
    n, m = int(200 * scale), int(400 * scale)
    X = rng.standard_normal((n, m))
    y = rng.standard_normal(n)
    part = GroupPartition(sizes=(4,) * (m // 4))
    # the numpy block-descent twin is orders of magnitude slower, so it gets
    # a quarter-size problem to keep the default run short
    mb = m // 4 - m // 4 % 4
    Xb, partb = X[:, :mb], GroupPartition(sizes=(4,) * (mb // 4))
    v = rng.standard_normal(int(200_000 * scale))
    return [
        ("cd_lasso", lambda impl: cd_lasso(X, y, 2.0, impl=impl)),
        ("bcd_group", lambda impl: bcd_group_lasso(Xb, y, 2.0, partb, impl=impl)),
        (
            "fista_sparse_group",
            lambda impl: fista_sparse_group(X, y, 1.0, 1.0, part, impl=impl),
        ),
        ("l1_support_size", lambda impl: project_l1(v, 10.0, impl=impl)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=3, help="timing repetitions")
    parser.add_argument("--scale", type=float, default=0.5, help="workload size factor")
    args = parser.parse_args()

    if not HAS_NUMBA:
        print("numba unavailable: timing the numpy twins only")

    impls = ("numba", "numpy") if HAS_NUMBA else ("numpy",)
    print(f"{'kernel':<20} " + " ".join(f"{i:>12}" for i in impls) + "  speedup")
    for name, call in workloads(args.scale):
        medians = {}
        for impl in impls:
            call(impl)
            times = timeit.repeat(lambda: call(impl), number=1, repeat=args.repeats)
            medians[impl] = statistics.median(times)
        row = " ".join(f"{medians[i] * 1e3:>10.2f}ms" for i in impls)
        if len(impls) == 2:
            row += f"  {medians['numpy'] / medians['numba']:>6.1f}x"
        print(f"{name:<20} {row}")


if __name__ == "__main__":
    main()
