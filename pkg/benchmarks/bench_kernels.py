"""Compare the compiled and numpy mean-field kernels.

    python benchmarks/bench_kernels.py [--steps 200000] [--repeat 3]

Runs a fixed number of RK4 steps (tolerance 0, so no early exit) on the
monostable six-cell preset with both backends, checks that they agree and
prints steps per second.
"""
import argparse
import time

import numpy as np

from kerrssh import _kernels_py
from kerrssh.model import pack_mean_field
from kerrssh.presets import monostable_config

try:
    from kerrssh import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def time_backend(mod, packed, z0, dt, steps, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        z, n, res, _ = mod.rk4_evolve(z0, *packed, dt, steps, 0.0, steps)
        best = min(best, time.perf_counter() - t0)
    return best, z


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--steps", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    config = monostable_config()
    packed = pack_mean_field(config)
    z0 = np.zeros(config.index.size, dtype=complex)
    dt = 1e-3
    rows = [("python", _kernels_py)]
    if _kernels_c is not None:
        rows.insert(0, ("cython", _kernels_c))
    else:
        print("compiled extension not available; timing the fallback only")
    results = {}
    for name, mod in rows:
        results[name] = time_backend(mod, packed, z0, dt, args.steps, args.repeat)
        t = results[name][0]
        print(f"{name:>7}: {args.steps} RK4 steps in {t:.3f} s ({args.steps / t:,.0f} steps/s)")
    if len(results) == 2:
        diff = np.abs(results["cython"][1] - results["python"][1]).max()
        print(f"speed-up {results['python'][0] / results['cython'][0]:.1f}x, "
              f"max state difference {diff:.2e}")


if __name__ == "__main__":
    main()
