"""Loss functions: softmax cross-entropy (ConvNet) and mean sum-squared error (MLP)."""

import numpy as np

from ..errors import DataError, ShapeError


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean NLL over the batch; gradient = (softmax - onehot) / batch."""
    if logits.ndim != 2:
        raise ShapeError(f"logits must be [batch x classes], got {logits.shape}")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(f"labels {labels.shape} vs batch {logits.shape[0]}")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise DataError(f"label out of range 0..{logits.shape[1] - 1}")
    probs = softmax(logits)
    batch = logits.shape[0]
    picked = probs[np.arange(batch), labels]
    loss = -np.mean(np.log(np.maximum(picked, np.finfo(np.float64).tiny)))
    grad = probs.copy()
    grad[np.arange(batch), labels] -= 1.0
    return loss, grad / batch


def mse_loss(outputs, targets):
    """Mean over the batch of the summed squared error; grad = 2*(y-t)/batch."""
    if outputs.shape != targets.shape:
        raise ShapeError(f"mse: outputs {outputs.shape} vs targets {targets.shape}")
    batch = outputs.shape[0]
    diff = outputs - targets
    return np.sum(diff**2) / batch, 2.0 * diff / batch
