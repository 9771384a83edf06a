"""Model composition: shape inference, parameter init, forward/backward.

Parameters are a list of per-layer dicts (empty for parameter-free
layers).  Batch-norm running statistics live alongside gamma/beta but are
not trainable; gradients carry only the trainable keys.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError
from . import layers as L

TRAINABLE_KEYS = ("w", "b", "gamma", "beta")

_LAYER_TYPES = {
    "dense": L.Dense,
    "conv2d": L.Conv2D,
    "maxpool": L.MaxPool,
    "batchnorm": L.BatchNorm,
    "dropout": L.Dropout,
    "activation": L.Activation,
    "flatten": L.Flatten,
}
_TYPE_NAMES = {v: k for k, v in _LAYER_TYPES.items()}


@dataclass
class ModelSpec:
    layers: list
    input_shape: tuple          # (features,) or (channels, height, width)
    n_classes: int = 2

    def __post_init__(self):
        self.input_shape = tuple(self.input_shape)
        infer_shapes(self)      # validate at construction

    def to_dict(self):
        return {
            "input_shape": list(self.input_shape),
            "n_classes": self.n_classes,
            "layers": [
                {"type": _TYPE_NAMES[type(l)], **vars(l)} for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d):
        specs = []
        for entry in d["layers"]:
            entry = dict(entry)
            specs.append(_LAYER_TYPES[entry.pop("type")](**entry))
        return cls(layers=specs, input_shape=tuple(d["input_shape"]),
                   n_classes=d["n_classes"])


@dataclass
class ShapeStep:
    layer: object
    out_shape: tuple
    trim: tuple = ()    # (h, w) removed before a pool, if any


def infer_shapes(spec):
    """Shape chain through the model (batch axis excluded).

    Pool layers trim the right edge of each axis to divisibility; the trim
    is recorded in the returned steps.  Incompatibilities raise ShapeError
    with the chain up to the failure.
    """
    shape = tuple(spec.input_shape)
    steps = [ShapeStep(layer=None, out_shape=shape)]

    def fail(layer, why):
        chain = " -> ".join(str(s.out_shape) for s in steps)
        raise ShapeError(f"{type(layer).__name__}: {why} (chain so far: {chain})")

    for layer in spec.layers:
        trim = ()
        if isinstance(layer, L.Dense):
            if len(shape) != 1:
                fail(layer, f"needs flat input, got {shape}")
            if shape[0] != layer.in_features:
                fail(layer, f"expects {layer.in_features} features, got {shape[0]}")
            shape = (layer.out_features,)
        elif isinstance(layer, L.Conv2D):
            if len(shape) != 3:
                fail(layer, f"needs (channels, h, w) input, got {shape}")
            c, h, w = shape
            if layer.kernel_h > h or layer.kernel_w > w:
                fail(layer, f"kernel ({layer.kernel_h}, {layer.kernel_w}) "
                            f"larger than input ({h}, {w})")
            oh = (h - layer.kernel_h) // layer.stride_h + 1
            ow = (w - layer.kernel_w) // layer.stride_w + 1
            shape = (layer.filters, oh, ow)
        elif isinstance(layer, L.MaxPool):
            if len(shape) != 3:
                fail(layer, f"needs (channels, h, w) input, got {shape}")
            c, h, w = shape
            th, tw = h % layer.pool_h, w % layer.pool_w
            if th or tw:
                trim = (th, tw)
            shape = (c, (h - th) // layer.pool_h, (w - tw) // layer.pool_w)
        elif isinstance(layer, L.BatchNorm):
            feats = shape[0]
            if feats != layer.num_features:
                fail(layer, f"expects {layer.num_features} features, got {feats}")
        elif isinstance(layer, L.Flatten):
            shape = (int(np.prod(shape)),)
        elif isinstance(layer, (L.Dropout, L.Activation)):
            pass
        else:
            fail(layer, "unknown layer type")
        steps.append(ShapeStep(layer=layer, out_shape=shape, trim=trim))
    return steps


def init_parameters(spec, seed):
    """Glorot-uniform weights, zero biases, unit gamma / zero beta; deterministic."""
    rng = np.random.default_rng(seed)
    steps = infer_shapes(spec)
    params = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, L.Dense):
            bound = np.sqrt(6.0 / (layer.in_features + layer.out_features))
            params.append({
                "w": rng.uniform(-bound, bound,
                                 (layer.in_features, layer.out_features)),
                "b": np.zeros(layer.out_features),
            })
        elif isinstance(layer, L.Conv2D):
            in_ch = steps[i].out_shape[0]
            fan_in = in_ch * layer.kernel_h * layer.kernel_w
            fan_out = layer.filters * layer.kernel_h * layer.kernel_w
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            params.append({
                "w": rng.uniform(-bound, bound,
                                 (layer.filters, in_ch, layer.kernel_h,
                                  layer.kernel_w)),
                "b": np.zeros(layer.filters),
            })
        elif isinstance(layer, L.BatchNorm):
            params.append({
                "gamma": np.ones(layer.num_features),
                "beta": np.zeros(layer.num_features),
                "running_mean": np.zeros(layer.num_features),
                "running_var": np.ones(layer.num_features),
            })
        else:
            params.append({})
    return params


def model_forward(spec, params, x, mode="infer", rng=None):
    """Apply layers in order; returns (output, caches) for model_backward."""
    caches = []
    for i, layer in enumerate(spec.layers):
        try:
            if isinstance(layer, L.Dense):
                x, cache = L.dense_forward(x, params[i]["w"], params[i]["b"])
            elif isinstance(layer, L.Conv2D):
                x, cache = L.conv2d_forward(x, params[i]["w"], params[i]["b"],
                                            (layer.stride_h, layer.stride_w))
            elif isinstance(layer, L.MaxPool):
                th = x.shape[2] % layer.pool_h
                tw = x.shape[3] % layer.pool_w
                pre_trim = x.shape
                if th or tw:
                    x = x[:, :, :x.shape[2] - th, :x.shape[3] - tw]
                x, cache = L.maxpool_forward(x, (layer.pool_h, layer.pool_w))
                cache = (cache, pre_trim)
            elif isinstance(layer, L.BatchNorm):
                p = params[i]
                x, cache = L.batchnorm_forward(
                    x, p["gamma"], p["beta"], p["running_mean"],
                    p["running_var"], mode, layer.epsilon, layer.momentum)
            elif isinstance(layer, L.Dropout):
                x, cache = L.dropout_forward(x, layer.p, mode, rng)
            elif isinstance(layer, L.Activation):
                fwd = L.relu_forward if layer.kind == "relu" else L.tanh_forward
                x, cache = fwd(x)
            elif isinstance(layer, L.Flatten):
                cache = x.shape
                x = x.reshape(x.shape[0], -1)
            else:
                raise ShapeError(f"unknown layer {layer!r}")
        except Exception as exc:
            raise type(exc)(f"layer {i} ({type(layer).__name__}): {exc}") from exc
        caches.append(cache)
    return x, caches


def model_backward(spec, params, caches, dloss):
    """Consume caches in reverse; returns per-layer gradient dicts."""
    grads = [dict() for _ in spec.layers]
    dy = dloss
    for i in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[i]
        cache = caches[i]
        if isinstance(layer, L.Dense):
            dy, dw, db = L.dense_backward(cache, dy)
            grads[i] = {"w": dw, "b": db}
        elif isinstance(layer, L.Conv2D):
            dy, dw, db = L.conv2d_backward(cache, dy)
            grads[i] = {"w": dw, "b": db}
        elif isinstance(layer, L.MaxPool):
            pool_cache, pre_trim = cache
            dy = L.maxpool_backward(pool_cache, dy)
            if dy.shape != pre_trim:
                full = np.zeros(pre_trim)
                full[:, :, :dy.shape[2], :dy.shape[3]] = dy
                dy = full
        elif isinstance(layer, L.BatchNorm):
            dy, dgamma, dbeta = L.batchnorm_backward(cache, dy)
            grads[i] = {"gamma": dgamma, "beta": dbeta}
        elif isinstance(layer, L.Dropout):
            dy = L.dropout_backward(cache, dy)
        elif isinstance(layer, L.Activation):
            bwd = L.relu_backward if layer.kind == "relu" else L.tanh_backward
            dy = bwd(cache, dy)
        elif isinstance(layer, L.Flatten):
            dy = dy.reshape(cache)
    return grads, dy


# ---------------------------------------------------------------------------
# Default architectures

def mlp_spec(n_features=192, hidden=(100, 75), n_classes=2):
    """Fully-connected net with tanh throughout, including the output layer."""
    specs = []
    prev = n_features
    for width in hidden:
        specs += [L.Dense(prev, width), L.Activation("tanh")]
        prev = width
    specs += [L.Dense(prev, n_classes), L.Activation("tanh")]
    return ModelSpec(layers=specs, input_shape=(n_features,),
                     n_classes=n_classes)


def convnet_spec(n_channels=64, n_samples=656, n_classes=2,
                 conv_filters=(8, 16, 32), time_kernels=(16, 11, 9),
                 pool_w=4, dense_width=64, dropout_p=0.5):
    """Default ConvNet: a full-electrode-extent 2-D first layer, two 1-D
    time convolutions, each conv followed by batch norm / ReLU / pooling,
    then two fully-connected layers with dropout between them."""
    specs = []
    shape = (1, n_channels, n_samples)
    for stage, (f, kw) in enumerate(zip(conv_filters, time_kernels)):
        kh = n_channels if stage == 0 else 1
        specs += [
            L.Conv2D(f, kh, kw),
            L.BatchNorm(f),
            L.Activation("relu"),
            L.MaxPool(1, pool_w),
        ]
        c, h, w = shape
        h = (h - kh) + 1
        w = (w - kw) + 1
        shape = (f, h, w - w % pool_w)
        shape = (f, h, shape[2] // pool_w)
    flat = int(np.prod(shape))
    specs += [
        L.Flatten(),
        L.Dense(flat, dense_width),
        L.Activation("relu"),
        L.Dropout(dropout_p),
        L.Dense(dense_width, n_classes),
    ]
    return ModelSpec(layers=specs, input_shape=(1, n_channels, n_samples),
                     n_classes=n_classes)
