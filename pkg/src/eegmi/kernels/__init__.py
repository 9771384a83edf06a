"""Hot numeric kernels with two interchangeable backends.

The compiled Cython extension (`eegmi.kernels._fast`) is preferred when it
built successfully; otherwise the vectorized numpy implementation is used.
`EEGMI_BACKEND=python|cython` forces a backend (cython raises if the
extension is missing).  `benchmarks/bench_kernels.py` compares the two.

Both backends implement the same contracts, including the max-pool
first-occurrence tie rule and fixed summation order per output element.
"""

import os

from . import numpy_backend as _numpy_backend

_requested = os.environ.get("EEGMI_BACKEND", "auto")
if _requested not in ("auto", "python", "cython"):
    raise ImportError(f"EEGMI_BACKEND must be 'python' or 'cython', got {_requested!r}")

if _requested == "python":
    _impl = _numpy_backend
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _numpy_backend
        BACKEND = "python"

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
sosfilt = _impl.sosfilt

numpy_backend = _numpy_backend

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool_forward",
    "maxpool_backward",
    "sosfilt",
    "numpy_backend",
]
