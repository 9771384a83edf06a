"""Stage implementations behind the CLI: fetch, epochs, features, train,
eval, reproduce.  Each stage is deterministic given (config, seed) and
idempotent with respect to the cache."""

import csv
import json
import logging
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import dataset, dsp, fetch, metrics, optim, train as train_mod
from .errors import ConfigError, DataError, EegmiError, FetchError, InvalidRecordError
from .nn import checkpoint, model as nn_model

logger = logging.getLogger(__name__)

VERSION = "0.1.0"

# The four model/optimizer combinations the comparison table reports.
REPRODUCE_COMBOS = (
    ("mlp", "sgd", "MLP-GD"),
    ("convnet", "sgdm", "ConvNet-SGDM"),
    ("convnet", "rmsprop", "ConvNet-RmsPROP"),
    ("convnet", "adam", "ConvNet-Adam"),
)


def _out_dir(cfg):
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def make_filter_transform(cfg):
    """Full-record band filter applied per channel, or None when disabled."""
    fcfg = cfg["filter"]
    if not fcfg["enabled"]:
        return None

    def transform(samples, sample_rate):
        filt = dsp.design_butterworth(fcfg["order"], fcfg["cutoff_hz"],
                                      sample_rate, fcfg["kind"])
        return dsp.filter_record(filt, samples)

    return transform


# ---------------------------------------------------------------------------
# fetch

def stage_fetch(cfg):
    """Populate the cache; returns a report dict.  Raises FetchError only
    when every requested file failed."""
    report = {"fetched": 0, "cached": 0, "failed": []}
    for subject in sorted(cfgmod.subject_list(cfg)):
        for run in sorted(cfg["runs"]):
            try:
                target = Path(cfg["cache_dir"]) / fetch.record_relpath(subject, run)
                already = target.exists() and target.stat().st_size > 0
                fetch.fetch_record(subject, run, cfg["cache_dir"])
                report["cached" if already else "fetched"] += 1
            except InvalidRecordError:
                raise
            except EegmiError as exc:
                report["failed"].append({"subject": subject, "run": run,
                                         "error": str(exc)})
                logger.warning("fetch failed for S%03dR%02d: %s", subject, run, exc)
    if report["failed"] and report["fetched"] + report["cached"] == 0:
        raise FetchError(f"all {len(report['failed'])} fetches failed")
    return report


# ---------------------------------------------------------------------------
# epochs

def epochs_path(cfg):
    return _out_dir(cfg) / "epochs.bin"


def stage_epochs(cfg):
    epochs = dataset.build_dataset(
        cfgmod.subject_list(cfg), cfg["cache_dir"], runs=tuple(cfg["runs"]),
        epoch_len=cfg["epoch_len"], transform=make_filter_transform(cfg))
    path = epochs_path(cfg)
    dataset.save_epochs(path, epochs)
    logger.info("wrote %d epochs to %s", len(epochs), path)
    return path, len(epochs)


# ---------------------------------------------------------------------------
# features

def features_path(cfg):
    return _out_dir(cfg) / "features.csv"


def compute_features(cfg, epochs):
    wcfg = cfg["welch"]
    rows = [dsp.epoch_to_features(ep.data, segment_len=wcfg["segment_len"],
                                  nfft=wcfg["nfft"], band=tuple(wcfg["band"]))
            for ep in epochs]
    return np.array(rows)


def stage_features(cfg):
    epochs = dataset.load_epochs(epochs_path(cfg))
    if not epochs:
        raise DataError("epoch container is empty")
    features = compute_features(cfg, epochs)
    wcfg = cfg["welch"]
    names = dsp.feature_names(epochs[0].data.shape[0], band=tuple(wcfg["band"]),
                              nfft=wcfg["nfft"])
    path = features_path(cfg)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["label"])
        for row, ep in zip(features, epochs):
            writer.writerow([repr(v) for v in row] + [ep.label])
    return path, features.shape


# ---------------------------------------------------------------------------
# train

def build_train_config(cfg, model=None, optimizer=None):
    model = model or cfg["model"]
    optimizer = optimizer or cfg["optimizer"]
    tcfg = cfg["train"]
    if model == "mlp":
        lr = tcfg["learning_rate"] or 0.01
        batch = tcfg["batch_size"] or 1
        loss = "mse"
        schedule = "constant"
        standardize = True
    else:
        lr = tcfg["learning_rate"] or 0.001
        batch = tcfg["batch_size"] or 100
        loss = "cross_entropy"
        schedule = "step_decay"
        standardize = False
    opt = optim.OptimizerConfig(kind=optimizer, learning_rate=lr,
                                schedule=schedule)
    return train_mod.TrainConfig(
        optimizer=opt, max_epochs=tcfg["max_epochs"], patience=tcfg["patience"],
        val_fraction=tcfg["val_fraction"], batch_size=batch, loss=loss,
        seed=cfg["seed"], standardize_features=standardize)


def _holdout(cfg, epochs):
    frac = cfg["train"]["test_fraction"]
    subjects = {ep.subject_id for ep in epochs}
    if frac <= 0 or len(subjects) < 2:
        if frac > 0:
            logger.warning("single subject: skipping subject holdout")
        return epochs, [], []
    pool, test = train_mod.split_subject_holdout(epochs, frac, cfg["seed"])
    test_subjects = sorted({ep.subject_id for ep in test})
    return pool, test, test_subjects


def _model_inputs(cfg, model, epochs):
    labels = np.array([ep.label_index for ep in epochs], dtype=np.int64)
    if model == "convnet":
        x = np.stack([ep.data for ep in epochs])[:, np.newaxis, :, :]
    else:
        x = compute_features(cfg, epochs)
    return x, labels


def _model_spec(cfg, model, epochs):
    channels, samples = epochs[0].data.shape
    if model == "convnet":
        return nn_model.convnet_spec(n_channels=channels, n_samples=samples)
    n_bins = len(dsp.band_bin_frequencies(tuple(cfg["welch"]["band"]),
                                          cfg["welch"]["nfft"]))
    return nn_model.mlp_spec(n_features=channels * n_bins)


def artifact_stem(model, optimizer):
    return f"{model}_{optimizer}"


def stage_train(cfg, model=None, optimizer=None):
    """Train one model; writes checkpoint + history CSV.  Returns paths."""
    model = model or cfg["model"]
    optimizer = optimizer or cfg["optimizer"]
    tconf = build_train_config(cfg, model, optimizer)

    epochs = dataset.load_epochs(epochs_path(cfg))
    pool, _test, test_subjects = _holdout(cfg, epochs)
    if not pool:
        raise DataError("no training epochs left after subject holdout")
    x, labels = _model_inputs(cfg, model, pool)
    spec = _model_spec(cfg, model, pool)

    # MLP feature standardization happens inside train() with statistics
    # from the 85% estimation split only; eval reuses them via the meta.
    meta = {
        "model": model,
        "optimizer": optimizer,
        "seed": cfg["seed"],
        "test_subjects": test_subjects,
        "welch": cfg["welch"],
        "filter": cfg["filter"],
    }

    params = nn_model.init_parameters(spec, cfg["seed"])
    best_params, history = train_mod.train(spec, params, x, labels, tconf)
    if history.feature_mean is not None:
        meta["feature_mean"] = history.feature_mean.tolist()
        meta["feature_std"] = history.feature_std.tolist()

    out = _out_dir(cfg)
    stem = artifact_stem(model, optimizer)
    ckpt = out / f"{stem}.ckpt"
    checkpoint.save_checkpoint(ckpt, spec, best_params, meta=meta)
    hist_path = out / f"history_{stem}.csv"
    train_mod.history_to_csv(history, hist_path)
    logger.info("%s: best val loss %.6f at epoch %d (%s)", stem,
                history.best_val_loss, history.best_epoch, history.stop_reason)
    return ckpt, hist_path, history


def describe_train_config(cfg, model=None, optimizer=None):
    """Config echo for the train command (scripted checks read this)."""
    tconf = build_train_config(cfg, model, optimizer)
    opt = tconf.optimizer
    echo = {
        "model": model or cfg["model"],
        "optimizer": opt.kind,
        "learning_rate": opt.learning_rate,
        "schedule": opt.schedule,
        "batch_size": tconf.batch_size,
        "loss": tconf.loss,
        "max_epochs": tconf.max_epochs,
        "patience": tconf.patience,
    }
    if opt.schedule == "step_decay":
        echo["decay"] = {"factor": opt.decay_factor, "every": opt.decay_every}
    if opt.kind == "adam":
        echo["beta"] = [opt.beta1, opt.beta2]
        echo["epsilon"] = opt.epsilon
    if opt.kind == "rmsprop":
        echo["squared_decay"] = opt.beta2
        echo["epsilon"] = opt.epsilon
    if opt.kind == "sgdm":
        echo["momentum"] = opt.momentum
    if (model or cfg["model"]) == "mlp":
        echo["hidden_layers"] = [100, 75]
    return echo


# ---------------------------------------------------------------------------
# eval

def stage_eval(cfg, ckpt_path):
    spec, params, _opt, meta = checkpoint.load_checkpoint(ckpt_path)
    epochs = dataset.load_epochs(epochs_path(cfg))
    test_subjects = set(meta.get("test_subjects", []))
    if test_subjects:
        test = [ep for ep in epochs if ep.subject_id in test_subjects]
    else:
        test = epochs
    if not test:
        raise DataError("no test epochs match the checkpoint's holdout subjects")

    model = meta.get("model", cfg["model"])
    x, labels = _model_inputs(cfg, model, test)
    if "feature_mean" in meta:
        mean = np.array(meta["feature_mean"])
        std = np.array(meta["feature_std"])
        x = (x - mean) / std

    cm = train_mod.evaluate(spec, params, x, labels)
    m = metrics.metrics(cm)
    out = _out_dir(cfg)
    stem = artifact_stem(model, meta.get("optimizer", cfg["optimizer"]))
    json_path = out / f"confusion_{stem}.json"
    txt_path = out / f"confusion_{stem}.txt"
    metrics.write_report(json_path, txt_path, cm, m)
    return json_path, txt_path, m


# ---------------------------------------------------------------------------
# reproduce

def stage_reproduce(cfg, skip_fetch=False):
    """Full pipeline: fetch -> epochs -> features -> 4x train/eval -> table."""
    results = []
    if not skip_fetch:
        stage_fetch(cfg)
    stage_epochs(cfg)
    stage_features(cfg)
    for model, optimizer, name in REPRODUCE_COMBOS:
        ckpt, _hist, _history = stage_train(cfg, model, optimizer)
        _js, _txt, m = stage_eval(cfg, ckpt)
        results.append({"name": name, "model": model, "optimizer": optimizer,
                        "accuracy": float(m.accuracy)})

    out = _out_dir(cfg)
    table = out / "comparison.csv"
    with open(table, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "model", "optimizer", "accuracy"])
        for r in results:
            writer.writerow([r["name"], r["model"], r["optimizer"],
                             repr(r["accuracy"])])
    text = out / "comparison.txt"
    with open(text, "w") as fh:
        for r in results:
            fh.write(f"{r['name']:<16} accuracy {r['accuracy']:.4f}\n")
    return results, table, text
