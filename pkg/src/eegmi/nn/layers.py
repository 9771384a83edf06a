"""Layer specs and their forward/backward passes.

Every forward returns (output, cache); every backward consumes that cache
plus the upstream gradient and returns the input gradient (and parameter
gradients where applicable).  All arrays are float64.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError, DataError, ShapeError
from .. import kernels


# ---------------------------------------------------------------------------
# Specs

@dataclass(frozen=True)
class Dense:
    in_features: int
    out_features: int

@dataclass(frozen=True)
class Conv2D:
    filters: int
    kernel_h: int       # electrode/spatial axis
    kernel_w: int       # time axis
    stride_h: int = 1
    stride_w: int = 1

@dataclass(frozen=True)
class MaxPool:
    pool_h: int
    pool_w: int         # stride equals pool size: non-overlapping

@dataclass(frozen=True)
class BatchNorm:
    num_features: int
    epsilon: float = 1e-5
    momentum: float = 0.1

@dataclass(frozen=True)
class Dropout:
    p: float = 0.5

@dataclass(frozen=True)
class Activation:
    kind: str           # "relu" | "tanh"

@dataclass(frozen=True)
class Flatten:
    pass


# ---------------------------------------------------------------------------
# Activations

def relu_forward(x):
    return np.maximum(x, 0.0), x

def relu_backward(cache, dy):
    # gradient 0 at exactly x == 0
    return dy * (cache > 0.0)

def tanh_forward(x):
    y = np.tanh(x)
    return y, y

def tanh_backward(cache, dy):
    return dy * (1.0 - cache**2)


# ---------------------------------------------------------------------------
# Dense

def dense_forward(x, w, b):
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense: input {x.shape} incompatible with weights {w.shape}")
    return x @ w + b, (x, w)

def dense_backward(cache, dy):
    x, w = cache
    if dy.shape != (x.shape[0], w.shape[1]):
        raise ShapeError(f"dense backward: upstream {dy.shape} vs output "
                         f"({x.shape[0]}, {w.shape[1]})")
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


# ---------------------------------------------------------------------------
# Convolution (valid padding, cross-correlation)

def conv2d_forward(x, w, b, stride=(1, 1)):
    sh, sw = stride
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with kernel {w.shape}")
    if w.shape[2] > x.shape[2] or w.shape[3] > x.shape[3]:
        raise ShapeError(f"conv2d: kernel {w.shape[2:]} larger than input {x.shape[2:]}")
    x = np.ascontiguousarray(x)
    y = kernels.conv2d_forward(x, w, b, sh, sw)
    return y, (x, w, stride)

def conv2d_backward(cache, dy):
    x, w, (sh, sw) = cache
    return kernels.conv2d_backward(x, w, sh, sw, np.ascontiguousarray(dy))


# ---------------------------------------------------------------------------
# Max pooling (non-overlapping; first occurrence wins ties)

def maxpool_forward(x, pool=(2, 2)):
    ph, pw = pool
    if x.ndim != 4:
        raise ShapeError(f"maxpool expects 4-D input, got {x.shape}")
    if x.shape[2] % ph or x.shape[3] % pw:
        raise ShapeError(
            f"maxpool: input {x.shape[2:]} not divisible by pool ({ph}, {pw})")
    x = np.ascontiguousarray(x)
    y, idx = kernels.maxpool_forward(x, ph, pw)
    return y, (idx, pool, x.shape)

def maxpool_backward(cache, dy):
    idx, (ph, pw), in_shape = cache
    return kernels.maxpool_backward(idx, np.ascontiguousarray(dy),
                                    ph, pw, in_shape[2], in_shape[3])


# ---------------------------------------------------------------------------
# Batch normalization (per feature; conv inputs normalize per channel
# over batch and spatial positions)

def _bn_axes(x, num_features):
    if x.ndim == 2:
        if x.shape[1] != num_features:
            raise ShapeError(f"batchnorm: {x.shape[1]} features, expected {num_features}")
        return (0,), (1, num_features)
    if x.ndim == 4:
        if x.shape[1] != num_features:
            raise ShapeError(f"batchnorm: {x.shape[1]} channels, expected {num_features}")
        return (0, 2, 3), (1, num_features, 1, 1)
    raise ShapeError(f"batchnorm expects 2-D or 4-D input, got {x.shape}")


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode,
                      epsilon=1e-5, momentum=0.1):
    """Train: normalize with batch statistics, update running averages
    in place.  Infer: normalize with running statistics."""
    axes, bshape = _bn_axes(x, gamma.shape[0])
    g = gamma.reshape(bshape)
    b = beta.reshape(bshape)
    if mode == "train":
        if x.shape[0] < 2:
            raise DataError("batchnorm needs batch size >= 2 in train mode")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mean = running_mean
        var = running_var
    std = np.sqrt(var + epsilon)
    xhat = (x - mean.reshape(bshape)) / std.reshape(bshape)
    y = g * xhat + b
    n = x.size // gamma.shape[0]
    return y, (xhat, std.reshape(bshape), g, axes, n, mode)


def batchnorm_backward(cache, dy):
    xhat, std, gamma, axes, n, mode = cache
    dgamma = (dy * xhat).sum(axis=axes)
    dbeta = dy.sum(axis=axes)
    dxhat = dy * gamma
    if mode == "train":
        sum_dxhat = gamma * dbeta.reshape(std.shape)
        sum_dxhat_xhat = gamma * dgamma.reshape(std.shape)
        dx = (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n) / std
    else:
        dx = dxhat / std
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# Dropout (inverted: survivors scaled at train time, inference is identity)

def dropout_forward(x, p, mode, rng=None):
    if not 0.0 <= p < 1.0:
        raise ArgumentError(f"dropout p must be in [0, 1), got {p}")
    if mode != "train" or p == 0.0:
        return x, None
    if rng is None:
        raise ArgumentError("dropout in train mode needs an rng")
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * mask, mask

def dropout_backward(cache, dy):
    if cache is None:
        return dy
    return dy * cache
