"""Time the numba kernels against the numpy fallback on the same inputs.

    python3 benchmarks/bench_kernels.py --size 256 --repeat 3

With ARTIFACT_NO_NUMBA=1 only the fallback column is measured.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from artifact import fixtures
from artifact.dynamics import kernels


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(size):
    f = fixtures.POLYNOMIALS["rabbit-poly"]()
    C, deg, sig = f.packed
    R = f.escape_radius
    xs = np.linspace(-1.6, 1.6, size)
    grid = (xs[None, :] + 1j * xs[:, None]).ravel()
    far = grid * 4 + 3
    starts = [complex(8 * np.cos(t), 8 * np.sin(t)) for t in np.linspace(0, 6.28, 200)]

    def newton_batch(use):
        return [kernels.newton(C, deg, sig, 0, z, 3, (1.1 * z) ** 8, 1e-12, 60, 1e30, use_numba=use)[0]
                for z in starts]

    return {
        f"escape_time {size}x{size}":
            lambda use: kernels.escape_time(C, deg, sig, 0, grid, 200, R, True, use_numba=use),
        f"green {size}x{size}":
            lambda use: kernels.green(C, deg, sig, 0, far, 200, 1e60, use_numba=use),
        "newton x200": newton_batch,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256, help="grid side for the raster kernels")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    print(f"numba available: {kernels.HAVE_NUMBA}")
    print(f"{'kernel':<22}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(args.size).items():
        t_np, r_np = best_of(lambda: fn(False), args.repeat)
        if kernels.HAVE_NUMBA:
            fn(True)  # compile outside the timing
            t_nb, r_nb = best_of(lambda: fn(True), args.repeat)
            diff = float(np.max(np.abs(np.asarray(r_np) - np.asarray(r_nb))))
            print(f"{name:<22}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>12.2e}")
        else:
            print(f"{name:<22}{t_np:>12.4f}{'-':>12}{'-':>10}{'-':>12}")


if __name__ == "__main__":
    main()
