"""Pipeline configuration (single JSON document) and the run manifest.

Validation is fail-fast: any unknown key anywhere in the document is
rejected by name.  `--set a.b=value` overrides map onto the same tree.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .optim import KINDS as OPTIMIZER_KINDS

_SCHEMA = {
    "cache_dir": str,
    "subjects": (list, str),       # list of ints or "all"
    "runs": list,
    "filter": {
        "enabled": bool,
        "kind": str,               # "high" | "low"
        "cutoff_hz": (int, float),
        "order": int,
    },
    "welch": {
        "segment_len": int,
        "nfft": int,
        "band": list,
    },
    "model": str,                  # "mlp" | "convnet"
    "optimizer": str,
    "train": {
        "max_epochs": int,
        "patience": int,
        "val_fraction": (int, float),
        "batch_size": (int, type(None)),   # None -> model default
        "learning_rate": (int, float, type(None)),
        "test_fraction": (int, float),
    },
    "epoch_len": int,
    "output_dir": str,
    "seed": int,
}

DEFAULTS = {
    "cache_dir": "cache",
    "subjects": [1],
    "runs": [4, 8, 12],
    "filter": {"enabled": True, "kind": "high", "cutoff_hz": 30.0, "order": 3},
    "welch": {"segment_len": 24, "nfft": 96, "band": [8.0, 12.0]},
    "model": "convnet",
    "optimizer": "adam",
    "train": {
        "max_epochs": 100,
        "patience": 15,
        "val_fraction": 0.15,
        "batch_size": None,
        "learning_rate": None,
        "test_fraction": 0.2,
    },
    "epoch_len": 656,
    "output_dir": "out",
    "seed": 0,
}


def _check(tree, schema, path=""):
    for key, value in tree.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config key {here!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{here!r} must be an object")
            _check(value, expected, here)
        elif not isinstance(value, expected):
            raise ConfigError(f"{here!r} has wrong type {type(value).__name__}")


def _merge(base, override, path=""):
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            out[key] = _merge(base[key], value, f"{path}.{key}")
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=(), seed=None, output_dir=None):
    """Resolve the effective config: defaults <- file <- --set <- flags."""
    tree = {}
    if path is not None:
        try:
            tree = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(tree, dict):
            raise ConfigError("config file must contain a JSON object")
    _check(tree, _SCHEMA)
    merged = _merge(DEFAULTS, tree)
    for item in overrides:
        merged = _apply_set(merged, item)
    if seed is not None:
        merged["seed"] = seed
    if output_dir is not None:
        merged["output_dir"] = str(output_dir)
    _check(merged, _SCHEMA)
    _validate(merged)
    return merged


def _apply_set(tree, item):
    if "=" not in item:
        raise ConfigError(f"--set needs key=value, got {item!r}")
    dotted, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = {}
    cursor = node
    keys = dotted.split(".")
    for key in keys[:-1]:
        cursor[key] = {}
        cursor = cursor[key]
    cursor[keys[-1]] = value
    _check(node, _SCHEMA)
    return _merge(tree, node)


def _validate(cfg):
    if cfg["model"] not in ("mlp", "convnet"):
        raise ConfigError(f"model must be 'mlp' or 'convnet', got {cfg['model']!r}")
    if cfg["optimizer"] not in OPTIMIZER_KINDS:
        raise ConfigError(f"optimizer must be one of {OPTIMIZER_KINDS}")
    if cfg["filter"]["kind"] not in ("high", "low"):
        raise ConfigError("filter.kind must be 'high' or 'low'")
    if cfg["subjects"] != "all":
        if not cfg["subjects"] or not all(isinstance(s, int) for s in cfg["subjects"]):
            raise ConfigError("subjects must be 'all' or a non-empty list of ints")
    if not cfg["runs"] or not all(isinstance(r, int) for r in cfg["runs"]):
        raise ConfigError("runs must be a non-empty list of ints")
    band = cfg["welch"]["band"]
    if len(band) != 2 or band[0] > band[1]:
        raise ConfigError("welch.band must be [low, high]")
    if not 0.0 <= cfg["train"]["test_fraction"] < 1.0:
        raise ConfigError("train.test_fraction must be in [0, 1)")


def subject_list(cfg):
    if cfg["subjects"] == "all":
        return list(range(1, 110))
    return list(cfg["subjects"])


# ---------------------------------------------------------------------------
# Run manifest

@dataclass
class RunManifest:
    command: str
    config: dict
    version: str
    dataset_files: list = field(default_factory=list)   # [{path, bytes}]
    outputs: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    def add_output(self, path):
        self.outputs.append(str(path))

    def fingerprint_files(self, paths):
        self.dataset_files = [
            {"path": str(p), "bytes": Path(p).stat().st_size}
            for p in paths if Path(p).exists()
        ]

    def write(self, path):
        """Atomic write (temp file + rename)."""
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(json.dumps(asdict(self), indent=2) + "\n")
        tmp.replace(path)


class StageTimer:
    def __init__(self, manifest, name):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.manifest.timings[self.name] = round(time.monotonic() - self.start, 3)
        return False
