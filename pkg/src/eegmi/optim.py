"""First-order optimizers: steepest descent, SGD with momentum, Adam, RMSProp.

Parameters and gradients are lists of per-layer dicts of float64 arrays
(the shape the nn engine produces).  All steps mutate parameters in place
and are deterministic.  SGDM uses the heavy-ball form v <- mu*v + g,
theta <- theta - lr*v; Adam applies bias correction, RMSProp does not.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

KINDS = ("sgd", "sgdm", "adam", "rmsprop")


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 0.001
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    schedule: str = "constant"      # "constant" | "step_decay"
    decay_factor: float = 0.1
    decay_every: int = 10
    weight_decay: float = 0.0       # hook only; no value is prescribed

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"optimizer kind must be one of {KINDS}, "
                              f"got {self.kind!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be > 0")
        for name in ("momentum", "beta1", "beta2", "decay_factor"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {v}")
        if self.schedule not in ("constant", "step_decay"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")


def _each(params, grads):
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameter slots vs {len(grads)} gradient slots")
    for i, g in enumerate(grads):
        for key, grad in g.items():
            p = params[i].get(key)
            if p is None or p.shape != grad.shape:
                raise ShapeError(
                    f"slot {i}/{key}: parameter shape "
                    f"{None if p is None else p.shape} vs gradient {grad.shape}")
            yield i, key, p, grad


def _slot(state, i, key, like):
    slots = state["slots"]
    while len(slots) <= i:
        slots.append({})
    if key not in slots[i]:
        slots[i][key] = np.zeros_like(like)
    return slots[i][key]


def init_state(kind):
    return {"kind": kind, "t": 0, "slots": []}


def sgd_step(params, grads, lr):
    for _i, _k, p, g in _each(params, grads):
        p -= lr * g
    return params


def sgdm_step(params, grads, state, lr, momentum=0.9):
    for i, k, p, g in _each(params, grads):
        v = _slot(state, i, f"{k}.vel", g)
        v *= momentum
        v += g
        p -= lr * v
    return params, state


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.99, epsilon=1e-8):
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i, k, p, g in _each(params, grads):
        m = _slot(state, i, f"{k}.m", g)
        v = _slot(state, i, f"{k}.v", g)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g**2
        p -= lr * (m / c1) / (np.sqrt(v / c2) + epsilon)
    return params, state


def rmsprop_step(params, grads, state, lr, decay=0.99, epsilon=1e-8):
    for i, k, p, g in _each(params, grads):
        s = _slot(state, i, f"{k}.sq", g)
        s *= decay
        s += (1.0 - decay) * g**2
        p -= lr * g / (np.sqrt(s) + epsilon)
    return params, state


def schedule_lr(base_lr, epoch, schedule="constant", factor=0.1, every=10):
    """Step decay multiplies by `factor` once per `every` epochs (0-indexed)."""
    if schedule == "constant":
        return base_lr
    if schedule == "step_decay":
        return base_lr * factor ** (epoch // every)
    raise ConfigError(f"unknown schedule {schedule!r}")


def apply_update(config, params, grads, state, epoch):
    """One optimizer step at the scheduled learning rate for `epoch`."""
    lr = schedule_lr(config.learning_rate, epoch, config.schedule,
                     config.decay_factor, config.decay_every)
    if config.weight_decay:
        grads = [
            {k: g + config.weight_decay * params[i][k] for k, g in slot.items()}
            for i, slot in enumerate(grads)
        ]
    if config.kind == "sgd":
        sgd_step(params, grads, lr)
    elif config.kind == "sgdm":
        sgdm_step(params, grads, state, lr, config.momentum)
    elif config.kind == "adam":
        adam_step(params, grads, state, lr, config.beta1, config.beta2,
                  config.epsilon)
    else:
        rmsprop_step(params, grads, state, lr, config.beta2, config.epsilon)
    return lr
