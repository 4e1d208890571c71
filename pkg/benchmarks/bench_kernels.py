"""Compare the numba and pure-numpy implementations of the hot kernels.

    python benchmarks/bench_kernels.py [--steps 200000] [--assets 4] [--p 40] [--repeat 3]

Each kernel runs once per backend to warm up (numba compiles on first call);
the table reports the best of ``--repeat`` timed runs and the largest
difference (relative to the numpy output's largest entry) between the two backends' outputs.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from crossimpact import _kernels


def best_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(steps, n, p, rng):
    # one trade per combined-time step, as in real order flow
    signs = np.zeros((steps, n))
    signs[np.arange(steps), rng.integers(0, n, steps)] = rng.choice([-1.0, 1.0], steps)
    dH = rng.normal(scale=1e-5, size=(p, n, n))
    days = np.arange(0, steps, 5000, dtype=np.int64)
    innov = rng.standard_normal((steps, n))
    phi = rng.uniform(0.1, 0.9, n)
    r = rng.standard_normal((steps, n))
    # biased sample autocovariance of the flow: a positive definite block-Toeplitz system
    flow = _kernels.ar1_filter_numpy(innov, phi)
    blocks = _kernels.cross_moments_numpy(flow, flow, p, 0) / steps
    rhs = rng.standard_normal((p, n, n))
    return {
        "ar1_filter": ((innov, phi), _kernels.ar1_filter_numba, _kernels.ar1_filter_numpy),
        "propagate": ((signs, dH, days), _kernels.propagate_numba, _kernels.propagate_numpy),
        "cross_moments": ((signs, r, p, 0), _kernels.cross_moments_numba, _kernels.cross_moments_numpy),
        "block_levinson": ((blocks, rhs), _kernels.block_levinson_numba, _kernels.block_levinson_numpy),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--assets", type=int, default=4)
    ap.add_argument("--p", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"steps={args.steps} assets={args.assets} p={args.p}")
    print(f"{'kernel':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'rel diff':>14}")
    for name, (inputs, fast, slow) in cases(args.steps, args.assets, args.p, rng).items():
        t_fast = best_time(lambda: fast(*inputs), args.repeat)
        t_slow = best_time(lambda: slow(*inputs), args.repeat)
        ref = slow(*inputs)
        diff = float(np.max(np.abs(fast(*inputs) - ref)) / np.max(np.abs(ref)))
        print(f"{name:<16}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
