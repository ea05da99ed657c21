"""Timing comparison of the numba and numpy kernel implementations.

Runs the three hot kernels (simplex draws, fused draw-and-evaluate,
exact transport) through both code paths, checks that they agree, and
prints best-of-N wall times with the speedup.

Usage:
    python3 benchmarks/bench_kernels.py [--count 500000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from copulashock import _kernels
from copulashock.transport import ground_distance_matrix


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sampling(count, n, repeat):
    rng = np.random.default_rng(0)
    rbar = rng.normal(0.0, 0.01, n)
    b = rng.normal(size=(n, n)) * 0.01
    sigma = b @ b.T

    w_np = _kernels.sample_weights_numpy(1, n, count)
    w_nb = _kernels.sample_weights_numba(1, n, count)
    weights_dev = np.abs(w_np - w_nb).max()

    r_np, v_np = _kernels.sample_eval_numpy(1, n, count, rbar, sigma)
    r_nb, v_nb = _kernels.sample_eval_numba(1, n, count, rbar, sigma)
    eval_dev = max(np.abs(r_np - r_nb).max(), np.abs(v_np - v_nb).max())

    rows = [
        (
            "sample_weights(n=%d, count=%d)" % (n, count),
            best_of(lambda: _kernels.sample_weights_numpy(1, n, count), repeat),
            best_of(lambda: _kernels.sample_weights_numba(1, n, count), repeat),
            weights_dev,
        ),
        (
            "sample_eval(n=%d, count=%d)" % (n, count),
            best_of(lambda: _kernels.sample_eval_numpy(1, n, count, rbar, sigma), repeat),
            best_of(lambda: _kernels.sample_eval_numba(1, n, count, rbar, sigma), repeat),
            eval_dev,
        ),
    ]
    return rows


def bench_transport(m, pairs, repeat):
    rng = np.random.default_rng(1)
    cost = ground_distance_matrix(m)
    problems = []
    for _ in range(pairs):
        a = rng.random(m * m) + 1e-3
        b = rng.random(m * m) + 1e-3
        problems.append((a / a.sum(), b / b.sum()))

    def run(solver):
        return [solver(a, b, cost) for a, b in problems]

    dev = np.abs(
        np.array(run(_kernels.transport_numpy))
        - np.array(run(_kernels.transport_numba))
    ).max()
    return [
        (
            "transport(%dx%d grid, %d solves)" % (m, m, pairs),
            best_of(lambda: run(_kernels.transport_numpy), repeat),
            best_of(lambda: run(_kernels.transport_numba), repeat),
            dev,
        )
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--count", type=int, default=500_000,
                        help="Monte Carlo draws per sampling benchmark")
    parser.add_argument("--assets", type=int, default=10)
    parser.add_argument("--grid", type=int, default=10,
                        help="copula resolution for the transport benchmark")
    parser.add_argument("--pairs", type=int, default=20,
                        help="transport solves per timed run")
    parser.add_argument("--repeat", type=int, default=3,
                        help="repeats per benchmark; best time is reported")
    args = parser.parse_args(argv)

    if not _kernels.HAS_NUMBA:
        parser.error("numba is not importable; nothing to compare")

    # trigger jit compilation outside the timed region
    _kernels.sample_weights_numba(0, 2, 4)
    _kernels.sample_eval_numba(0, 2, 4, np.zeros(2), np.eye(2))
    _kernels.transport_numba(
        np.array([0.5, 0.5]), np.array([0.5, 0.5]), np.eye(2)
    )

    rows = bench_sampling(args.count, args.assets, args.repeat)
    rows += bench_transport(args.grid, args.pairs, args.repeat)

    header = ("kernel", "numpy", "numba", "speedup", "max |diff|")
    print("%-42s %9s %9s %8s %11s" % header)
    for name, t_np, t_nb, dev in rows:
        print(
            "%-42s %8.3fs %8.3fs %7.1fx %11.2e"
            % (name, t_np, t_nb, t_np / t_nb, dev)
        )


if __name__ == "__main__":
    main()
