"""Time the compiled and numpy grid-search kernels on the same N = 2 instance.

    python benchmarks/bench_kernels.py [--resolution 200] [--repeat 3]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from nomaisac import _grid_kernel_py, oracle, solver_su
from nomaisac.scenario import SystemConfig, sample_channels
from nomaisac.sensing import spec_from_config

try:
    from nomaisac import _grid_kernel
except ImportError:
    _grid_kernel = None


def timed(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--resolution", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    cfg = SystemConfig(n_antennas=2, n_users=1)
    spec = spec_from_config(cfg)
    ch = sample_channels(cfg)
    r0 = oracle.zero_loss_max_rate(ch, spec)
    eps2 = r0 + 0.5 * (solver_su.max_rate(ch, spec.pt) - r0)

    backends = {"python": _grid_kernel_py.grid_search}
    if _grid_kernel is not None:
        backends["cython"] = _grid_kernel.grid_search
    results = {}
    original = oracle.grid_search
    try:
        for name, fn in backends.items():
            oracle.grid_search = fn
            t, res = timed(lambda: oracle.grid_search_single_user(ch, spec, eps2, resolution=args.resolution),
                           args.repeat)
            results[name] = (t, res.loss)
            print(f"{name:>7}: {t * 1e3:9.1f} ms  loss={res.loss:.12e}")
    finally:
        oracle.grid_search = original
    if len(results) == 2:
        (tp, lp), (tc, lc) = results["python"], results["cython"]
        print(f"speedup: {tp / tc:.1f}x  |loss diff| = {abs(lp - lc):.2e}")
    else:
        print("compiled kernel not built; only the numpy fallback was timed")


if __name__ == "__main__":
    main()
