"""Compare the compiled and numpy backends of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 7]

Prints the best wall time per call for each backend and the speed-up, after
checking that both backends agree on the inputs used.
"""

import argparse
import timeit

import numpy as np

from locdens import _kernels_py
from locdens.kernels import KERNEL_CODES
from locdens.model import make_model

try:
    from locdens import _kernels
except ImportError:
    _kernels = None


def _cases(rng):
    for n in (10**4, 10**5, 10**6):
        x = rng.standard_normal((n, 1))
        for kernel in ("indicator", "epanechnikov"):
            m = make_model(0.0, 0.3, 3, kernel=kernel)
            args = (x, np.asarray(m.x0, dtype=float), m.h,
                    np.asarray(m.basis.exponents, dtype=np.int64), KERNEL_CODES[m.kernel.kind])
            yield f"window_stats n={n:<8d} {kernel}", "window_stats", args
        u1 = 1.0 - rng.random(n // 2)
        u2 = rng.random(n // 2)
        yield f"box_muller   n={n:<8d}", "box_muller", (u1, u2)


def _best(fn, args, repeat):
    number = 3
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()
    if _kernels is None:
        print("compiled extension not built; nothing to compare")
        return
    rng = np.random.default_rng(0)
    print(f"{'case':<40s} {'numpy':>10s} {'cython':>10s} {'speed-up':>9s}")
    for label, name, fargs in _cases(rng):
        py, cy = getattr(_kernels_py, name), getattr(_kernels, name)
        a, b = py(*fargs), cy(*fargs)
        if name == "window_stats":
            assert a[0] == b[0] and np.allclose(a[1], b[1], rtol=1e-12)
        else:
            assert np.allclose(a, b, rtol=1e-13, atol=1e-15)
        tp, tc = _best(py, fargs, args.repeat), _best(cy, fargs, args.repeat)
        print(f"{label:<40s} {tp * 1e3:8.3f}ms {tc * 1e3:8.3f}ms {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
