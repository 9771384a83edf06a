"""Command line interface.

Subcommands: fetch | epochs | features | train | eval | reproduce.
Progress and logging go to stderr; machine-readable results go to files
(plus a small JSON summary on stdout for scripting).

Exit codes: 0 success, 1 unexpected error, 2 config error, 3 data error,
4 divergence, 5 fetch failure (nothing retrieved / host unreachable),
6 partial fetch failure.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import config as cfgmod
from . import pipeline
from .errors import (
    ConfigError,
    DataError,
    DivergenceError,
    EegmiError,
    FetchError,
    InvalidRecordError,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DIVERGENCE = 4
EXIT_FETCH = 5
EXIT_FETCH_PARTIAL = 6

logger = logging.getLogger("eegmi")


class OutputLock:
    """One lock file per output directory; concurrent runs refuse to start."""

    def __init__(self, output_dir):
        Path(output_dir).mkdir(parents=True, exist_ok=True)
        self.path = Path(output_dir) / ".lock"

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"output dir is locked by another run ({self.path}); "
                "remove the lock file if that run is dead") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _manifest(cfg, command):
    return cfgmod.RunManifest(command=command, config=cfg,
                              version=pipeline.VERSION)


def _write_manifest(cfg, manifest, command):
    Path(cfg["output_dir"]).mkdir(parents=True, exist_ok=True)
    manifest.fingerprint_files(
        Path(cfg["cache_dir"]).glob("S*/S*.edf"))
    manifest.write(Path(cfg["output_dir"]) / f"manifest_{command}.json")


def cmd_fetch(cfg, args):
    manifest = _manifest(cfg, "fetch")
    with cfgmod.StageTimer(manifest, "fetch"):
        report = pipeline.stage_fetch(cfg)
    _write_manifest(cfg, manifest, "fetch")
    _emit(report)
    return EXIT_FETCH_PARTIAL if report["failed"] else EXIT_OK


def cmd_epochs(cfg, args):
    manifest = _manifest(cfg, "epochs")
    with OutputLock(cfg["output_dir"]), cfgmod.StageTimer(manifest, "epochs"):
        path, count = pipeline.stage_epochs(cfg)
        manifest.add_output(path)
    _write_manifest(cfg, manifest, "epochs")
    _emit({"epochs": count, "path": str(path)})
    return EXIT_OK


def cmd_features(cfg, args):
    manifest = _manifest(cfg, "features")
    with OutputLock(cfg["output_dir"]), cfgmod.StageTimer(manifest, "features"):
        path, shape = pipeline.stage_features(cfg)
        manifest.add_output(path)
    _write_manifest(cfg, manifest, "features")
    _emit({"rows": shape[0], "columns": shape[1] + 1, "path": str(path)})
    return EXIT_OK


def cmd_train(cfg, args):
    echo = pipeline.describe_train_config(cfg)
    print(json.dumps({"config": echo}, indent=2), file=sys.stderr)
    manifest = _manifest(cfg, "train")
    with OutputLock(cfg["output_dir"]), cfgmod.StageTimer(manifest, "train"):
        try:
            ckpt, hist, history = pipeline.stage_train(cfg)
        except DivergenceError:
            _write_manifest(cfg, manifest, "train")
            raise
        manifest.add_output(ckpt)
        manifest.add_output(hist)
    _write_manifest(cfg, manifest, "train")
    _emit({"checkpoint": str(ckpt), "history": str(hist),
           "best_epoch": history.best_epoch,
           "best_val_loss": history.best_val_loss,
           "stop_reason": history.stop_reason,
           "config": echo})
    return EXIT_OK


def cmd_eval(cfg, args):
    manifest = _manifest(cfg, "eval")
    with OutputLock(cfg["output_dir"]), cfgmod.StageTimer(manifest, "eval"):
        js, txt, m = pipeline.stage_eval(cfg, args.checkpoint)
        manifest.add_output(js)
        manifest.add_output(txt)
    _write_manifest(cfg, manifest, "eval")
    _emit({"report_json": str(js), "report_txt": str(txt),
           "accuracy": float(m.accuracy)})
    return EXIT_OK


def cmd_reproduce(cfg, args):
    manifest = _manifest(cfg, "reproduce")
    with OutputLock(cfg["output_dir"]), cfgmod.StageTimer(manifest, "reproduce"):
        results, table, text = pipeline.stage_reproduce(
            cfg, skip_fetch=args.skip_fetch)
        manifest.add_output(table)
        manifest.add_output(text)
    _write_manifest(cfg, manifest, "reproduce")
    _emit({"results": results, "table": str(table)})
    return EXIT_OK


COMMANDS = {
    "fetch": cmd_fetch,
    "epochs": cmd_epochs,
    "features": cmd_features,
    "train": cmd_train,
    "eval": cmd_eval,
    "reproduce": cmd_reproduce,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eegmi",
        description="Imagined left/right fist classification from raw EEG")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="K=V", help="override a config key (dotted path)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--output", type=Path, default=None,
                        help="override output_dir")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "eval":
            p.add_argument("checkpoint", type=Path)
        if name == "reproduce":
            p.add_argument("--skip-fetch", action="store_true",
                           help="assume the cache is already populated")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load_config(args.config, args.overrides,
                                 seed=args.seed, output_dir=args.output)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except InvalidRecordError as exc:
        logger.error("invalid record: %s", exc)
        return EXIT_CONFIG
    except DivergenceError as exc:
        logger.error("training diverged: %s", exc)
        return EXIT_DIVERGENCE
    except DataError as exc:
        logger.error("data error: %s", exc)
        return EXIT_DATA
    except FetchError as exc:
        logger.error("fetch failed: %s", exc)
        return EXIT_FETCH
    except EegmiError as exc:
        logger.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
