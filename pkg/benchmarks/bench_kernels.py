"""Time the Heun kernels with numba and with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--steps N] [--traj 1 8 64]

Both backends are called directly, so the OAMOPTO_DISABLE_NUMBA flag does
not matter here. The first numba call (compilation, or loading the cache)
is excluded from the timings.
"""

import argparse
import time

import numpy as np

from oamopto import _kernels
from oamopto._accel import HAVE_NUMBA
from oamopto.constants import HBAR


def linear_params():
    # inertia, omega^2, gamma_m, hbar g, g, detuning, gamma0/2, drive, sigma_th, sigma_opt
    g = 1e16
    return np.array([1e-15, 1e12, 1e2, HBAR * g, g, 1e6, 1e5, 2e6, 1e-20, 0.0])


def rotational_params(l=2, g=10.0):
    # inertia, gamma_m, 4 l hbar g, 2 l, g, detuning', gamma0/2, drive, torque, sigma_th, sigma_opt
    return np.array([1e-24, 1e3, 4 * l * HBAR * g, 2.0 * l, g, 0.0, 500.0, 1e5, 1e-20, 1e-25, 0.0])


def run(kernel, par, y0, dt, dw, stride):
    y = y0.copy()
    out = np.empty((1 + dw.shape[0] // stride, 4, y.shape[1]))
    out[0] = y
    t0 = time.perf_counter()
    kernel(y, par, dt, dw, 0, stride, out, 1)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--traj", type=int, nargs="+", default=[1, 8, 64])
    ap.add_argument("--stride", type=int, default=10)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = {"linear": (linear_params(), 1e-9, [1e-12, 0.0, 10.0, 0.0]),
             "rotational": (rotational_params(), 1e-5, [0.0, 1e-23, 200.0, 0.0])}
    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    print(f"{'system':<11} {'traj':>5} {'steps':>7} " + " ".join(f"{b + ' [s]':>11}" for b in backends)
          + f" {'speedup':>8} {'max |diff|':>11}")
    for name, (par, dt, state) in cases.items():
        for ntraj in args.traj:
            y0 = np.repeat(np.array(state, dtype=float)[:, None], ntraj, axis=1)
            dw = rng.standard_normal((args.steps, 3, ntraj)) * np.sqrt(dt)
            timings, outs = {}, {}
            for b in backends:
                kernel = _kernels.KERNELS[(name, b)]
                if b == "numba":
                    run(kernel, par, y0, dt, dw[:2], args.stride)
                timings[b], outs[b] = run(kernel, par, y0, dt, dw, args.stride)
            line = f"{name:<11} {ntraj:>5} {args.steps:>7} " + " ".join(f"{timings[b]:>11.4f}" for b in backends)
            if "numba" in timings:
                diff = np.max(np.abs(outs["numba"] - outs["numpy"]) / (np.abs(outs["numpy"]) + 1e-300))
                line += f" {timings['numpy'] / timings['numba']:>8.1f} {diff:>11.2e}"
            print(line)


if __name__ == "__main__":
    main()
