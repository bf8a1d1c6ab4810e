#!/usr/bin/env python3
"""Benchmark the hot kernels under the numba and pure-numpy backends.

The backend is selected by the PRT_NUMBA environment variable at import
time, so each timing runs in a fresh subprocess. Workloads:

  * siwr      -- one epidemic integration of the 4-state waterborne model
  * cellcycle -- one 20-cycle integration of the 6-state oscillator
  * jacobi    -- eigendecomposition of a random symmetric 24x24 matrix
  * rank      -- a full finite-difference FIM of the SIWR observations

Usage: python benchmarks/bench_kernels.py [repeats]
"""

import json
import os
import subprocess
import sys

_WORKER = r"""
import json
import sys
import time

import numpy as np

from prt.accel import backend_name
from prt.models import (
    CELLCYCLE_SYSTEM,
    SIWR_DEFAULT_THETA,
    SIWR_SYSTEM,
    _siwr_packed,
    load_cellcycle_defaults,
    siwr,
)
from prt.ode import integrate
from prt.sensitivity import eigendecompose, jacobian_fd, local_sfim

repeats = int(sys.argv[1])

packed = _siwr_packed(SIWR_DEFAULT_THETA, 0.25, 25.0, 0.0)
siwr_times = np.linspace(0.0, 250.0, 20)
cc_theta = load_cellcycle_defaults()
cc_times = np.linspace(0.0, 480.0, 2048)
rng = np.random.default_rng(0)
sym = rng.standard_normal((24, 24))
sym = 0.5 * (sym + sym.T)
obs_model = siwr(theta_hat=SIWR_DEFAULT_THETA)


def bench(fn, warm=1):
    for _ in range(warm):
        fn()
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


results = {
    "backend": backend_name(),
    "siwr": bench(lambda: integrate(SIWR_SYSTEM, packed, (0.0, 250.0), siwr_times)),
    "cellcycle": bench(lambda: integrate(CELLCYCLE_SYSTEM, cc_theta, (0.0, 480.0),
                                         cc_times)),
    "jacobi": bench(lambda: eigendecompose(sym), warm=2),
    "rank": bench(lambda: local_sfim(jacobian_fd(obs_model, SIWR_DEFAULT_THETA))),
}
print(json.dumps(results))
"""


def run_backend(numba_on, repeats):
    env = dict(os.environ)
    env["PRT_NUMBA"] = "1" if numba_on else "0"
    out = subprocess.run([sys.executable, "-c", _WORKER, str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    print(f"timing best of {repeats} (plus warm-up) per backend ...")
    numba = run_backend(True, repeats)
    numpy_ = run_backend(False, repeats)
    names = ["siwr", "cellcycle", "jacobi", "rank"]
    width = max(len(n) for n in names)
    print(f"\n{'kernel':<{width}}  {'numba':>12}  {'numpy':>12}  {'speedup':>8}")
    for name in names:
        t_nb, t_np = numba[name], numpy_[name]
        print(f"{name:<{width}}  {t_nb * 1e3:>10.2f}ms  {t_np * 1e3:>10.2f}ms  "
              f"{t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
