"""Benchmark the swing-equation RK4 kernel: numba vs numpy fallback.

Runs the same integration workload in two subprocesses (one with
TSPRED_NO_NUMBA=1) and reports wall time and speedup. Also verifies both
backends produce identical trajectories.

Usage: python benchmarks/bench_kernels.py [--generators 10] [--steps 200000]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from tspred import kernels

ng, nsteps = json.loads(sys.argv[1])
rng = np.random.default_rng(0)
H = rng.uniform(2, 8, ng)
D = np.full(ng, 0.05)
E = rng.uniform(0.95, 1.1, ng)
b = rng.uniform(0.3, 1.2, (ng, ng)); b = (b + b.T) / 2; np.fill_diagonal(b, 0)
G = np.diag(rng.uniform(0.05, 0.3, ng))
B = b.copy(); np.fill_diagonal(B, -(b.sum(axis=1) + 0.5))
delta = rng.uniform(-0.3, 0.3, ng)
Pm = kernels.electrical_power(delta, E, G, B)
omega = np.zeros(ng)
out_d = np.empty((nsteps, ng)); out_w = np.empty((nsteps, ng))
args = (delta, omega, 1.0 / 240.0, nsteps, H, D, E, Pm, G, B,
        2 * np.pi * 60.0, 1e9, out_d, out_w)
kernels.rk4_span(*args)       # warm-up (includes JIT compilation)
t0 = time.perf_counter()
kernels.rk4_span(*args)
elapsed = time.perf_counter() - t0
print(json.dumps({
    "numba": kernels.NUMBA_ENABLED,
    "seconds": elapsed,
    "checksum": float(out_d.sum()),
}))
"""


def run_backend(no_numba, ng, nsteps):
    env = dict(os.environ, TSPRED_NO_NUMBA="1" if no_numba else "0")
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps([ng, nsteps])],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--generators", type=int, default=10)
    parser.add_argument("--steps", type=int, default=200_000)
    args = parser.parse_args()

    numba = run_backend(False, args.generators, args.steps)
    numpy_only = run_backend(True, args.generators, args.steps)
    assert numba["numba"] and not numpy_only["numba"]
    if numba["checksum"] != numpy_only["checksum"]:
        print("WARNING: backend results differ!")
    print(f"workload: {args.generators} generators, {args.steps} RK4 steps")
    print(f"numba : {numba['seconds']:.4f} s")
    print(f"numpy : {numpy_only['seconds']:.4f} s")
    print(f"speedup: {numpy_only['seconds'] / numba['seconds']:.1f}x "
          f"(identical results: "
          f"{numba['checksum'] == numpy_only['checksum']})")


if __name__ == "__main__":
    main()
