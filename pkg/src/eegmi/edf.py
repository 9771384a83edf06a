"""Bit-exact EDF/EDF+ reading, TAL annotation decoding, and a round-trip test writer.

EDF layout: a 256-byte fixed ASCII header, 256 ASCII bytes per signal, then
data records of 16-bit little-endian two's-complement samples.  EDF+ stores
annotations in a dedicated 'EDF Annotations' signal as TAL blocks
(onset/duration/text separated by 0x15 / 0x14, terminated by 0x00).
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EdfParseError

logger = logging.getLogger(__name__)

ANNOTATION_LABEL = "EDF Annotations"
EVENT_CODES = ("T0", "T1", "T2")

_FILENAME_RE = re.compile(r"S(\d{3})R(\d{2})\.edf$", re.IGNORECASE)


@dataclass
class AnnotationEvent:
    onset: float       # seconds from record start
    duration: float    # seconds
    code: str          # T0 (rest), T1 (left cue), T2 (right cue)

    def __post_init__(self):
        if self.onset < 0:
            raise EdfParseError(f"negative annotation onset {self.onset}")
        if self.duration <= 0:
            raise EdfParseError(f"non-positive annotation duration {self.duration}")
        if self.code not in EVENT_CODES:
            raise EdfParseError(f"unknown annotation code {self.code!r}")


@dataclass
class Recording:
    subject_id: int | None
    run_id: int | None
    sample_rate: float
    channels: list            # channel labels
    samples: np.ndarray       # [channel x time], physical units
    events: list = field(default_factory=list)

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise EdfParseError(f"non-positive sample rate {self.sample_rate}")
        if self.samples.ndim != 2 or self.samples.shape[0] != len(self.channels):
            raise EdfParseError(
                f"sample matrix {self.samples.shape} inconsistent with "
                f"{len(self.channels)} channel labels"
            )

    @property
    def n_samples(self):
        return self.samples.shape[1]


def _ascii_field(raw, offset, width, kind, name):
    text = raw[offset:offset + width].decode("ascii", errors="replace").strip()
    try:
        if kind is str:
            return text
        return kind(text)
    except ValueError:
        raise EdfParseError(f"cannot parse header field {name!r}: {text!r}",
                            offset=offset) from None


def parse_tal(raw):
    """Decode one annotation payload (TAL blocks) into T0/T1/T2 events.

    Timestamp-only TALs and annotations with other texts are ignored.
    Returned events are sorted by onset.
    """
    events = []
    data = bytes(raw).rstrip(b"\x00")
    for block in data.split(b"\x00"):
        if not block:
            continue
        fields = block.split(b"\x14")
        head = fields[0]
        texts = [t.decode("utf-8", errors="replace").strip() for t in fields[1:]]
        if b"\x15" in head:
            onset_b, dur_b = head.split(b"\x15", 1)
        else:
            onset_b, dur_b = head, b""
        try:
            onset = float(onset_b)
            duration = float(dur_b) if dur_b else 0.0
        except ValueError:
            raise EdfParseError(f"malformed TAL block {block!r}") from None
        for text in texts:
            if text in EVENT_CODES:
                events.append(AnnotationEvent(onset=onset, duration=duration,
                                              code=text))
    events.sort(key=lambda e: e.onset)
    return events


def parse_edf(path):
    """Parse an EDF/EDF+ file into a Recording.

    The annotation signal, if present, is decoded into events and excluded
    from the channel matrix.  All regular signals must share one sampling
    rate (uniform-rate layout only).
    """
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 256:
        raise EdfParseError(f"{path}: truncated fixed header "
                            f"({len(raw)} < 256 bytes)", offset=len(raw))

    header_bytes = _ascii_field(raw, 184, 8, int, "header_bytes")
    n_records = _ascii_field(raw, 236, 8, int, "n_records")
    record_duration = _ascii_field(raw, 244, 8, float, "record_duration")
    ns = _ascii_field(raw, 252, 4, int, "n_signals")
    if ns < 1:
        raise EdfParseError(f"{path}: no signals declared", offset=252)
    if header_bytes != 256 + 256 * ns:
        raise EdfParseError(
            f"{path}: header byte count {header_bytes} inconsistent with "
            f"{ns} signals (expected {256 + 256 * ns})", offset=184)
    if len(raw) < header_bytes:
        raise EdfParseError(f"{path}: truncated signal headers", offset=len(raw))

    def per_signal(offset, width, kind, name):
        base = 256 + offset * ns
        return [_ascii_field(raw, base + i * width, width, kind, name)
                for i in range(ns)]

    labels = per_signal(0, 16, str, "label")
    phys_min = per_signal(16 + 80 + 8, 8, float, "physical_min")
    phys_max = per_signal(16 + 80 + 8 + 8, 8, float, "physical_max")
    dig_min = per_signal(16 + 80 + 8 + 16, 8, int, "digital_min")
    dig_max = per_signal(16 + 80 + 8 + 24, 8, int, "digital_max")
    n_samp = per_signal(16 + 80 + 8 + 32 + 80, 8, int, "samples_per_record")

    record_len = sum(n_samp) * 2
    if n_records < 0:  # EDF+ permits -1; recover from the file size
        n_records = (len(raw) - header_bytes) // record_len if record_len else 0
    expected = header_bytes + n_records * record_len
    if len(raw) != expected:
        raise EdfParseError(
            f"{path}: file is {len(raw)} bytes, header arithmetic gives "
            f"{expected}", offset=min(len(raw), expected))

    data = np.frombuffer(raw, dtype="<i2", offset=header_bytes)
    data = data.reshape(n_records, sum(n_samp))

    starts = np.cumsum([0] + n_samp)
    signal_idx = [i for i in range(ns) if labels[i] != ANNOTATION_LABEL]
    annot_idx = [i for i in range(ns) if labels[i] == ANNOTATION_LABEL]

    rates = {n_samp[i] for i in signal_idx}
    if len(rates) > 1:
        raise EdfParseError(
            f"{path}: non-uniform sampling rates across signals: {sorted(rates)}")
    if not signal_idx:
        raise EdfParseError(f"{path}: only annotation signals present")
    if record_duration <= 0:
        raise EdfParseError(f"{path}: non-positive record duration", offset=244)

    events = []
    for i in annot_idx:
        payload = data[:, starts[i]:starts[i + 1]].astype("<i2").tobytes()
        events.extend(parse_tal(payload))
    events.sort(key=lambda e: e.onset)
    sample_rate = n_samp[signal_idx[0]] / record_duration

    channels = []
    rows = []
    for i in signal_idx:
        if dig_max[i] == dig_min[i]:
            raise EdfParseError(f"{path}: signal {i} has empty digital range")
        gain = (phys_max[i] - phys_min[i]) / (dig_max[i] - dig_min[i])
        digital = data[:, starts[i]:starts[i + 1]].reshape(-1).astype(np.float64)
        rows.append((digital - dig_min[i]) * gain + phys_min[i])
        channels.append(labels[i])

    subject_id = run_id = None
    m = _FILENAME_RE.search(path.name)
    if m:
        subject_id, run_id = int(m.group(1)), int(m.group(2))

    return Recording(subject_id=subject_id, run_id=run_id,
                     sample_rate=sample_rate, channels=channels,
                     samples=np.vstack(rows), events=events)


# ---------------------------------------------------------------------------
# Round-trip test writer (canonical EDF+ output; not a general clinical writer)

_WRITER_DIG_MIN, _WRITER_DIG_MAX = -32768, 32767
_ANNOT_SAMPLES = 32  # 64 bytes of annotation space per record


def _num(value):
    """Canonical ASCII for a float: no trailing zeros, ints without a dot."""
    if value == int(value):
        return str(int(value))
    return repr(float(value))


def _pad(text, width):
    b = text.encode("ascii")
    if len(b) > width:
        raise ValueError(f"field {text!r} exceeds {width} bytes")
    return b.ljust(width)


def write_edf(recording, path):
    """Write a Recording as canonical EDF+ (gain 1, 1-second records).

    Built for round-trip testing: write_edf(parse_edf(f)) == f holds for
    files this writer produced.  Samples must be integral and within the
    16-bit range; the channel count times rate must divide the length.
    """
    fs = recording.sample_rate
    if fs != int(fs):
        raise ValueError("writer supports integer sample rates only")
    spr = int(fs)
    n_samples = recording.n_samples
    if n_samples % spr:
        raise ValueError("writer needs whole 1-second records")
    n_records = n_samples // spr
    ns = len(recording.channels) + 1

    digital = np.round(recording.samples).astype(np.int64)
    if not np.array_equal(digital, recording.samples):
        raise ValueError("writer requires integral sample values")
    if digital.min() < _WRITER_DIG_MIN or digital.max() > _WRITER_DIG_MAX:
        raise ValueError("sample values exceed the 16-bit digital range")

    header = b"".join([
        _pad("0", 8),
        _pad("X X X X", 80),
        _pad("Startdate 01-JAN-2000 X X X", 80),
        _pad("01.01.00", 8),
        _pad("00.00.00", 8),
        _pad(str(256 + 256 * ns), 8),
        _pad("EDF+C", 44),
        _pad(str(n_records), 8),
        _pad("1", 8),
        _pad(str(ns), 4),
    ])

    labels = list(recording.channels) + [ANNOTATION_LABEL]
    n_samp = [spr] * len(recording.channels) + [_ANNOT_SAMPLES]

    def column(values, width):
        return b"".join(_pad(v, width) for v in values)

    header += column(labels, 16)
    header += column([""] * ns, 80)                       # transducer
    header += column(["uV"] * (ns - 1) + [""], 8)          # physical dimension
    header += column([str(_WRITER_DIG_MIN)] * ns, 8)       # physical min
    header += column([str(_WRITER_DIG_MAX)] * ns, 8)       # physical max
    header += column([str(_WRITER_DIG_MIN)] * ns, 8)       # digital min
    header += column([str(_WRITER_DIG_MAX)] * ns, 8)       # digital max
    header += column([""] * ns, 80)                        # prefiltering
    header += column([str(n) for n in n_samp], 8)
    header += column([""] * ns, 32)                        # reserved

    # Distribute TALs into the record covering each event's onset.
    tals = [[] for _ in range(n_records)]
    for ev in sorted(recording.events, key=lambda e: e.onset):
        rec = min(int(ev.onset), n_records - 1)
        tals[rec].append(
            f"+{_num(ev.onset)}\x15{_num(ev.duration)}\x14{ev.code}\x14".encode())

    chunks = [header]
    for rec in range(n_records):
        block = digital[:, rec * spr:(rec + 1) * spr].astype("<i2")
        chunks.append(block.tobytes())
        annot = f"+{rec}\x14\x14".encode() + b"\x00" + b"\x00".join(tals[rec])
        if len(annot) > 2 * _ANNOT_SAMPLES:
            raise ValueError(f"annotations overflow record {rec}")
        chunks.append(annot.ljust(2 * _ANNOT_SAMPLES, b"\x00"))

    Path(path).write_bytes(b"".join(chunks))
