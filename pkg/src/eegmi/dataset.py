"""Cutting annotated recordings into labeled epochs and pooling them into datasets.

Also defines the epoch container file: a small binary format (documented in
the README) so other tools can read extracted datasets without this package.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, EdfParseError, EegmiError
from . import edf, fetch

logger = logging.getLogger(__name__)

LABELS = ("Left", "Right")
CODE_TO_LABEL = {"T1": "Left", "T2": "Right"}

TASK_RUNS = (4, 8, 12)       # imagined-fist runs in the EEGMMI schedule
EPOCH_LEN = 656              # samples per epoch at 160 Hz


@dataclass
class Epoch:
    data: np.ndarray         # [channel x sample]
    label: str               # "Left" | "Right"
    subject_id: int
    run_id: int
    onset_sample: int

    def __post_init__(self):
        if self.label not in LABELS:
            raise DataError(f"label must be one of {LABELS}, got {self.label!r}")

    @property
    def label_index(self):
        return LABELS.index(self.label)


def extract_epochs(recording, epoch_len=EPOCH_LEN):
    """One epoch per T1/T2 cue, starting at the cue's onset sample.

    Returns (epochs, skipped): cues whose window would overrun the record
    end are counted in `skipped` rather than raising.  T0 (rest) events
    produce nothing.  A recording without annotations is an error.
    """
    if not recording.events:
        raise DataError("recording has no annotation events")
    epochs = []
    skipped = 0
    for ev in recording.events:
        label = CODE_TO_LABEL.get(ev.code)
        if label is None:
            continue
        onset = int(round(ev.onset * recording.sample_rate))
        if onset + epoch_len > recording.n_samples:
            skipped += 1
            continue
        epochs.append(Epoch(
            data=recording.samples[:, onset:onset + epoch_len].copy(),
            label=label,
            subject_id=recording.subject_id if recording.subject_id else 0,
            run_id=recording.run_id if recording.run_id else 0,
            onset_sample=onset,
        ))
    if skipped:
        logger.warning("skipped %d event(s) overrunning the record end", skipped)
    return epochs, skipped


def build_dataset(subject_ids, cache_dir, runs=TASK_RUNS, epoch_len=EPOCH_LEN,
                  transform=None, fetcher=fetch.fetch_record):
    """Pool epochs from the given subjects' task runs, in deterministic order.

    Order is (subject asc, run asc, onset asc).  A failing subject (missing
    or corrupt files) is logged and skipped; only all subjects failing is
    fatal.  `transform(samples, sample_rate)` (e.g. a band filter) is
    applied to each recording's full sample matrix before epoch extraction.
    """
    subject_ids = list(subject_ids)
    if not subject_ids:
        raise ConfigError("subject list is empty")
    if len(set(subject_ids)) != len(subject_ids):
        raise ConfigError(f"duplicate subject ids in {subject_ids}")

    pooled = []
    failures = []
    for subject in sorted(subject_ids):
        try:
            subject_epochs = []
            for run in sorted(runs):
                path = fetcher(subject, run, cache_dir)
                recording = edf.parse_edf(path)
                if transform is not None:
                    recording.samples = transform(recording.samples,
                                                  recording.sample_rate)
                epochs, _ = extract_epochs(recording, epoch_len)
                for ep in epochs:
                    ep.subject_id, ep.run_id = subject, run
                subject_epochs.extend(epochs)
            pooled.extend(subject_epochs)
        except (EegmiError, OSError) as exc:
            failures.append(subject)
            logger.warning("skipping subject %d: %s", subject, exc)
    if not pooled:
        raise DataError(
            f"no usable epochs; all subjects failed: {failures or subject_ids}")
    return pooled


# ---------------------------------------------------------------------------
# Epoch container file
#
#   magic     8 bytes  b"EEGMIEPO"
#   version   u32 LE   (1)
#   count     u32 LE   number of epochs
#   channels  u32 LE
#   samples   u32 LE   per channel per epoch
#   tab_len   u32 LE   length of the JSON label table that follows
#   table     tab_len bytes, JSON list of label names
#   then per epoch:
#     subject u16 LE, run u16 LE, onset u32 LE, label u8 (table index),
#     channels*samples float32 LE, channel-major

MAGIC = b"EEGMIEPO"
CONTAINER_VERSION = 1
_EPOCH_HEAD = struct.Struct("<HHIB")


def save_epochs(path, epochs):
    if not epochs:
        raise DataError("refusing to write an empty epoch container")
    channels, samples = epochs[0].data.shape
    table = json.dumps(list(LABELS)).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIIII", CONTAINER_VERSION, len(epochs),
                             channels, samples, len(table)))
        fh.write(table)
        for ep in epochs:
            if ep.data.shape != (channels, samples):
                raise DataError(
                    f"epoch shape {ep.data.shape} != container shape "
                    f"({channels}, {samples})")
            fh.write(_EPOCH_HEAD.pack(ep.subject_id, ep.run_id,
                                      ep.onset_sample, ep.label_index))
            fh.write(ep.data.astype("<f4").tobytes())


def load_epochs(path):
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read epoch container {path}: {exc}") from exc
    if raw[:8] != MAGIC:
        raise DataError(f"{path}: not an epoch container (bad magic)")
    version, count, channels, samples, tab_len = struct.unpack_from("<IIIII", raw, 8)
    if version != CONTAINER_VERSION:
        raise DataError(f"{path}: unsupported container version {version}")
    offset = 28
    table = json.loads(raw[offset:offset + tab_len].decode())
    offset += tab_len
    block = channels * samples * 4
    epochs = []
    for _ in range(count):
        subject, run, onset, label_idx = _EPOCH_HEAD.unpack_from(raw, offset)
        offset += _EPOCH_HEAD.size
        data = np.frombuffer(raw, dtype="<f4", count=channels * samples,
                             offset=offset).astype(np.float64)
        offset += block
        epochs.append(Epoch(data=data.reshape(channels, samples),
                            label=table[label_idx], subject_id=subject,
                            run_id=run, onset_sample=onset))
    if offset != len(raw):
        raise DataError(f"{path}: {len(raw) - offset} trailing bytes")
    return epochs
