#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Runs the hot operations at pipeline-realistic shapes (the first ConvNet
layer and the full-record filter) and prints a timing table.  Both
backends are imported directly, so this works regardless of which one
the package selected at import time.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from eegmi import dsp, kernels
from eegmi.kernels import numpy_backend

try:
    from eegmi.kernels import _fast
except ImportError:
    _fast = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench(name, make_args, ops, repeats):
    args = make_args()
    rows = []
    for label, backend in (("cython", _fast), ("numpy", numpy_backend)):
        if backend is None:
            rows.append((label, None))
            continue
        fn = getattr(backend, ops)
        fn(*args)  # warm up
        rows.append((label, timeit(lambda: fn(*args), repeats)))
    base = dict(rows).get("numpy")
    print(f"\n{name}")
    for label, t in rows:
        if t is None:
            print(f"  {label:<8} unavailable (extension not built)")
        else:
            speedup = f"  ({base / t:.2f}x vs numpy)" if base and label != "numpy" else ""
            print(f"  {label:<8} {t * 1e3:9.2f} ms{speedup}")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    print(f"selected backend at import: {kernels.BACKEND}")

    x = rng.standard_normal((20, 1, 64, 656))
    w = rng.standard_normal((8, 1, 64, 16))
    b = np.zeros(8)
    bench("conv2d forward, batch 20 of (1, 64, 656) with 8 (64 x 16) kernels",
          lambda: (x, w, b, 1, 1), "conv2d_forward", args.repeats)

    y = kernels.conv2d_forward(x, w, b, 1, 1)
    dy = rng.standard_normal(y.shape)
    bench("conv2d backward, same shapes",
          lambda: (x, w, 1, 1, dy), "conv2d_backward", args.repeats)

    xp = rng.standard_normal((20, 8, 1, 640))
    bench("maxpool forward (1 x 4), batch 20 of (8, 1, 640)",
          lambda: (xp, 1, 4), "maxpool_forward", args.repeats)

    filt = dsp.design_butterworth(3, 30, 160, "high")
    record = rng.standard_normal((64, 20000))
    bench("sosfilt, 64 channels x 20000 samples, 3rd-order cascade",
          lambda: (filt.sos, record), "sosfilt", args.repeats)


if __name__ == "__main__":
    main()
