"""From-scratch neural network engine: layers, losses, model composition."""

from .layers import (
    Activation,
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool,
)
from .model import (
    ModelSpec,
    convnet_spec,
    infer_shapes,
    init_parameters,
    mlp_spec,
    model_backward,
    model_forward,
)

__all__ = [
    "Activation", "BatchNorm", "Conv2D", "Dense", "Dropout", "Flatten",
    "MaxPool", "ModelSpec", "convnet_spec", "infer_shapes", "init_parameters",
    "mlp_spec", "model_backward", "model_forward",
]
