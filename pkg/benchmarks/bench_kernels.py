"""Compare the compiled LSTM kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Times one layer forward and backward at a few training-like shapes and one
single-frame streaming step, and checks the two backends agree.
"""

import argparse
import time

import numpy as np

from antic3d.model import kernels

SHAPES = [
    # (L, B, D, H)
    (1, 1, 12, 100),
    (50, 8, 12, 100),
    (50, 8, 100, 100),
    (200, 8, 100, 100),
    (100, 1, 100, 100),
]


def make_case(L, B, D, H, rng):
    return (
        rng.normal(size=(L, B, D)),
        np.zeros((B, H)),
        np.zeros((B, H)),
        rng.uniform(-0.1, 0.1, size=(D, 4 * H)),
        rng.uniform(-0.1, 0.1, size=(H, 4 * H)),
        np.zeros(4 * H),
    )


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    try:
        cy = kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    py = kernels.get_backend("python")
    rng = np.random.default_rng(0)
    print(f"{'L':>4} {'B':>3} {'D':>4} {'H':>4}  {'fwd py ms':>10} {'fwd cy ms':>10} {'x':>5}"
          f"  {'bwd py ms':>10} {'bwd cy ms':>10} {'x':>5}  max|diff|")
    for L, B, D, H in SHAPES:
        case = make_case(L, B, D, H, rng)
        dhs = rng.normal(size=(L, B, H))
        out_py, out_cy = py[0](*case), cy[0](*case)
        g_py = py[1](*case[:5], *out_py, dhs)
        g_cy = cy[1](*case[:5], *out_cy, dhs)
        diff = max(float(np.max(np.abs(a - b))) for a, b in zip((*out_py, *g_py), (*out_cy, *g_cy)))
        f_py = best_time(lambda: py[0](*case), args.repeat)
        f_cy = best_time(lambda: cy[0](*case), args.repeat)
        b_py = best_time(lambda: py[1](*case[:5], *out_py, dhs), args.repeat)
        b_cy = best_time(lambda: cy[1](*case[:5], *out_cy, dhs), args.repeat)
        print(f"{L:>4} {B:>3} {D:>4} {H:>4}  {1e3 * f_py:>10.3f} {1e3 * f_cy:>10.3f} {f_py / f_cy:>5.1f}"
              f"  {1e3 * b_py:>10.3f} {1e3 * b_cy:>10.3f} {b_py / b_cy:>5.1f}  {diff:.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
