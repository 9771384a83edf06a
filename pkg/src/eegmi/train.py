"""Dataset splitting, the training loop with early stopping, and evaluation.

Both protocols run through `train`: the MLP path (batch size 1, MSE on
tanh outputs with +/-1 targets) and the ConvNet path (batch size 100,
softmax cross-entropy).  Training stops at max_epochs or after `patience`
consecutive validation evaluations without strict improvement, and the
returned parameters are the snapshot from the best epoch.
"""

import copy
import csv
from dataclasses import dataclass, field

import numpy as np

from . import optim
from .errors import ConfigError, DataError, DivergenceError
from .metrics import confusion_from_predictions
from .nn import model as nn_model
from .nn import losses

STD_FLOOR = 1e-12


@dataclass
class TrainConfig:
    optimizer: optim.OptimizerConfig
    max_epochs: int = 100
    patience: int = 15
    val_fraction: float = 0.15
    batch_size: int = 100
    loss: str = "cross_entropy"      # "cross_entropy" | "mse"
    seed: int = 0
    standardize_features: bool = False

    def __post_init__(self):
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must be in (0, 1)")
        if self.patience < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("patience, batch_size, max_epochs must be >= 1")
        if self.loss not in ("cross_entropy", "mse"):
            raise ConfigError(f"unknown loss {self.loss!r}")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    best_epoch: int = -1
    stop_reason: str = ""
    feature_mean: np.ndarray = None   # set when features were standardized
    feature_std: np.ndarray = None

    @property
    def best_val_loss(self):
        return self.val_loss[self.best_epoch]


# ---------------------------------------------------------------------------
# Splits

def _round_half_up(x):
    return int(np.floor(x + 0.5))


def split_train_val(items, val_fraction=0.15, seed=0):
    """Seeded shuffle, then split; |val| = round(val_fraction * n), clamped
    so both sides are non-empty.  Deterministic per seed."""
    n = len(items)
    if n < 2:
        raise DataError(f"need at least 2 items to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_val = min(max(_round_half_up(val_fraction * n), 1), n - 1)
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    if isinstance(items, np.ndarray):
        return items[train_idx], items[val_idx]
    return [items[i] for i in train_idx], [items[i] for i in val_idx]


def split_subject_holdout(epochs, test_fraction=0.2, seed=0):
    """Split at the subject level: no subject appears on both sides."""
    subjects = sorted({ep.subject_id for ep in epochs})
    if len(subjects) < 2:
        raise ConfigError("subject holdout needs at least 2 distinct subjects")
    order = np.random.default_rng(seed).permutation(len(subjects))
    n_test = min(max(_round_half_up(test_fraction * len(subjects)), 1),
                 len(subjects) - 1)
    test_subjects = {subjects[i] for i in order[:n_test]}
    train_pool = [ep for ep in epochs if ep.subject_id not in test_subjects]
    test = [ep for ep in epochs if ep.subject_id in test_subjects]
    return train_pool, test


def standardize_features(train, *apply_to):
    """Per-dimension z-score with statistics from the train set only."""
    train = np.asarray(train, dtype=np.float64)
    if train.size == 0:
        raise DataError("cannot standardize an empty train set")
    mean = train.mean(axis=0)
    std = np.maximum(train.std(axis=0), STD_FLOOR)
    transformed = [(train - mean) / std]
    transformed += [(np.asarray(a, dtype=np.float64) - mean) / std
                    for a in apply_to]
    return tuple(transformed), mean, std


# ---------------------------------------------------------------------------
# Targets and losses

def mse_targets(label_idx, n_classes=2):
    """+1 for the true class, -1 elsewhere (tanh output coding)."""
    t = -np.ones((len(label_idx), n_classes))
    t[np.arange(len(label_idx)), label_idx] = 1.0
    return t


def _batch_loss(spec, params, x, labels, loss_kind, mode, rng):
    out, caches = nn_model.model_forward(spec, params, x, mode, rng)
    if loss_kind == "cross_entropy":
        loss, dout = losses.softmax_cross_entropy(out, labels)
    else:
        loss, dout = losses.mse_loss(out, mse_targets(labels, out.shape[1]))
    return loss, dout, caches


def _dataset_loss(spec, params, x, labels, loss_kind, chunk=256):
    total = 0.0
    for start in range(0, len(x), chunk):
        sl = slice(start, start + chunk)
        loss, _, _ = _batch_loss(spec, params, x[sl], labels[sl],
                                 loss_kind, "infer", None)
        total += loss * (min(len(x), sl.stop) - start)
    return total / len(x)


# ---------------------------------------------------------------------------
# Training loop

class EarlyStopper:
    """Best-snapshot tracking with strict-improvement patience.

    `update` returns True when the loss strictly improved on the best so
    far (ties count as failures); `should_stop` turns True after
    `patience` consecutive non-improving evaluations."""

    def __init__(self, patience):
        self.patience = patience
        self.best_loss = np.inf
        self.best_epoch = -1
        self.best_params = None
        self.since_best = 0

    def update(self, epoch, val_loss, params):
        if val_loss < self.best_loss:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.best_params = copy.deepcopy(params)
            self.since_best = 0
            return True
        self.since_best += 1
        return False

    @property
    def should_stop(self):
        return self.since_best >= self.patience


def train(spec, params, x, labels, config):
    """Train on (x, labels); returns (best_params, TrainHistory).

    Validation is carved out of the given data with the config seed; the
    val loss is evaluated once per epoch in inference mode, and parameters
    are snapshot on every strict improvement.
    """
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(x) == 0 or len(x) != len(labels):
        raise DataError(f"bad dataset: {len(x)} inputs, {len(labels)} labels")

    seeds = np.random.SeedSequence(config.seed).spawn(2)
    idx_train, idx_val = split_train_val(np.arange(len(x)),
                                         config.val_fraction, config.seed)
    x_train, y_train = x[idx_train], labels[idx_train]
    x_val, y_val = x[idx_val], labels[idx_val]
    shuffle_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])
    state = optim.init_state(config.optimizer.kind)

    history = TrainHistory()
    if config.standardize_features:
        (x_train, x_val), mean, std = standardize_features(x_train, x_val)
        history.feature_mean = mean
        history.feature_std = std
    stopper = EarlyStopper(config.patience)

    for epoch in range(config.max_epochs):
        order = shuffle_rng.permutation(len(x_train))
        epoch_loss = 0.0
        lr = None
        for bi, start in enumerate(range(0, len(order), config.batch_size)):
            batch = order[start:start + config.batch_size]
            loss, dout, caches = _batch_loss(
                spec, params, x_train[batch], y_train[batch],
                config.loss, "train", dropout_rng)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch}, batch {bi}",
                    epoch=epoch, batch=bi)
            grads, _ = nn_model.model_backward(spec, params, caches, dout)
            lr = optim.apply_update(config.optimizer, params, grads, state, epoch)
            epoch_loss += loss * len(batch)

        val_loss = _dataset_loss(spec, params, x_val, y_val, config.loss)
        history.train_loss.append(epoch_loss / len(order))
        history.val_loss.append(val_loss)
        history.lr.append(lr)

        if stopper.update(epoch, val_loss, params):
            history.best_epoch = epoch
        elif stopper.should_stop:
            history.stop_reason = "patience"
            break
    else:
        history.stop_reason = "max_epochs"

    return stopper.best_params, history


# ---------------------------------------------------------------------------
# Prediction and evaluation

def predict(spec, params, x):
    """Class indices by argmax over the model's two outputs (ties -> lower index)."""
    out, _ = nn_model.model_forward(spec, params, np.asarray(x, dtype=np.float64))
    return np.argmax(out, axis=1)


def evaluate(spec, params, x, labels, classes=("Left", "Right")):
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise DataError("cannot evaluate on an empty test set")
    preds = predict(spec, params, x)
    return confusion_from_predictions(labels, preds, classes)


def history_to_csv(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr"])
        for i, (tr, vl, lr) in enumerate(zip(history.train_loss,
                                             history.val_loss, history.lr)):
            writer.writerow([i, repr(tr), repr(vl), repr(lr)])
