"""Timing comparison between the compiled and pure-NumPy inner loops.

Runs the same alternating-solver workloads on both backends and reports
wall time per run plus the final objectives, which must agree to
rounding.  Usage:

    python3 benchmarks/bench_kernels.py [--trials N] [--seed S]
"""

import argparse
import time

import numpy as np

from ialign import solvers
from ialign.channel import NetworkConfig, generate_network

try:
    from ialign import _kernels
except ImportError:
    _kernels = None
from ialign import _kernels_py


def _workloads():
    small = NetworkConfig.uniform(3, 2, 2, 1, power=1000.0)
    wide = NetworkConfig.uniform(4, 5, 5, 2, power=1000.0)
    return (
        ("min_leakage 3x(2,2) d=1", small, "min_leakage_run", (400, 1e-12, 0.0)),
        ("max_sinr    3x(2,2) d=1", small, "max_sinr_run", (200, 0.0, 1e8)),
        ("min_leakage 4x(5,5) d=2", wide, "min_leakage_run", (150, 1e-12, 0.0)),
        ("max_sinr    4x(5,5) d=2", wide, "max_sinr_run", (100, 0.0, 1e8)),
    )


def _run(kernels, name, config, fn_name, extra, trials, seed):
    w_fwd, w_rev = solvers._stream_weights(config)
    elapsed = 0.0
    finals = []
    for t in range(trials):
        ch = generate_network(config, seed + t)
        grid = solvers._channel_grid(ch)
        v0 = solvers.initial_precoders(config, seed + 1000 + t)
        fn = getattr(kernels, fn_name)
        t0 = time.perf_counter()
        out = fn(grid, w_fwd, w_rev, v0, *extra)
        elapsed += time.perf_counter() - t0
        finals.append(out[2][-1])
    return elapsed / trials, np.asarray(finals)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=5)
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled backend unavailable; build the extension first")
        return 1

    print(f"{'workload':28s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}  final objective match")
    for name, config, fn_name, extra in _workloads():
        t_py, f_py = _run(_kernels_py, name, config, fn_name, extra, args.trials, args.seed)
        t_cy, f_cy = _run(_kernels, name, config, fn_name, extra, args.trials, args.seed)
        scale = np.maximum(1.0, np.abs(f_py))
        agree = float(np.max(np.abs(f_py - f_cy) / scale))
        print(
            f"{name:28s} {t_py * 1e3:8.2f}ms {t_cy * 1e3:8.2f}ms {t_py / t_cy:7.1f}x"
            f"  max scaled diff {agree:.2e}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
