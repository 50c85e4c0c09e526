"""Compiled versus pure-Python kernels: network simplex and log-domain Sinkhorn.

Usage::

    python benchmarks/bench_kernels.py [--sizes 20,50,100,200] [--repeats 3]

Prints one row per (kernel, size) with the best wall time of each backend,
the speedup, and the largest disagreement between their outputs.
"""

import argparse
import time

import numpy as np

from otda import _fallback

try:
    from otda import _kernels
except ImportError:
    _kernels = None


def _best_time(fn, repeats):
    best, out = np.inf, None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _problem(n, seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.standard_normal((n, 2)), rng.standard_normal((n, 2)) + 0.5
    C = np.sqrt(((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1))
    return np.full(n, 1.0 / n), rng.dirichlet(np.ones(n)), C


def bench_simplex(mod, a, b, C):
    plan, *_ = mod.network_simplex(a, b, C)
    return float(np.sum(plan * C))


def bench_sinkhorn(mod, a, b, C, eps=0.05):
    f, g = np.zeros(a.size), np.zeros(b.size)
    mod.sinkhorn_log(np.log(a), np.log(b), C, eps, f, g, 2000, 1e-9, 10)
    return f


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="20,50,100,200")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _kernels is None:
        raise SystemExit("compiled kernels are not built; run `pip install -e .` first")

    print(f"{'kernel':<16}{'n':>6}{'python [s]':>14}{'compiled [s]':>14}{'speedup':>10}{'max diff':>12}")
    for n in (int(s) for s in args.sizes.split(",")):
        a, b, C = _problem(n, args.seed)
        for name, fn in (("network_simplex", bench_simplex), ("sinkhorn_log", bench_sinkhorn)):
            t_py, r_py = _best_time(lambda: fn(_fallback, a, b, C), args.repeats)
            t_c, r_c = _best_time(lambda: fn(_kernels, a, b, C), args.repeats)
            diff = float(np.max(np.abs(np.asarray(r_py) - np.asarray(r_c))))
            print(f"{name:<16}{n:>6}{t_py:>14.4f}{t_c:>14.4f}{t_py / t_c:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
