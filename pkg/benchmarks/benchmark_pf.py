"""Benchmark the Newton-Raphson kernel: compiled (numba) vs pure numpy.

The backend is chosen at import time from GRIDCHAT_PURE_NUMPY, so this
script re-executes itself in a subprocess for the second measurement.

Run: python3 benchmarks/benchmark_pf.py [--repeats N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time


def measure(repeats: int) -> tuple[str, float, float]:
    from gridchat import kernels
    from gridchat.acpf import solve_ac
    from gridchat.fixtures import feeder12
    from gridchat.model import apply_load_step

    net = feeder12()
    loads = apply_load_step(net, 19)
    solve_ac(net, loads)  # warm-up (compilation, caches)

    t0 = time.perf_counter()
    for _ in range(repeats):
        sol = solve_ac(net, loads)
    elapsed = time.perf_counter() - t0
    assert sol.converged
    return kernels.backend_name(), elapsed, elapsed / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=500)
    parser.add_argument("--single", action="store_true",
                        help="measure only the current backend and print CSV")
    args = parser.parse_args()

    if args.single:
        name, total, per = measure(args.repeats)
        print(f"{name},{total:.6f},{per * 1e3:.6f}")
        return

    results = []
    for pure in ("0", "1"):
        env = dict(os.environ, GRIDCHAT_PURE_NUMPY=pure)
        out = subprocess.run(
            [sys.executable, __file__, "--single", "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.strip().splitlines()[-1]
        name, total, per_ms = out.split(",")
        results.append((name, float(total), float(per_ms)))

    print(f"feeder-12 peak-hour power flow, {args.repeats} solves per backend")
    print(f"{'backend':<10} {'total [s]':>10} {'per solve [ms]':>15}")
    for name, total, per_ms in results:
        print(f"{name:<10} {total:>10.4f} {per_ms:>15.4f}")
    fast = min(results, key=lambda r: r[2])
    slow = max(results, key=lambda r: r[2])
    if fast[0] != slow[0]:
        print(f"speedup {slow[0]} -> {fast[0]}: {slow[2] / fast[2]:.1f}x")


if __name__ == "__main__":
    main()
