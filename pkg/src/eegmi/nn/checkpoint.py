"""Self-describing model checkpoint container.

Layout: magic, version, a length-prefixed JSON header (model spec, tensor
manifest, optimizer scalars), then the named tensors as little-endian
float64 blocks in manifest order.
"""

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .model import ModelSpec

MAGIC = b"EEGMICKP"
VERSION = 1


def _collect_tensors(prefix, slots):
    """Flatten a list of per-layer dicts into (name, array) pairs."""
    out = []
    for i, slot in enumerate(slots):
        for key in sorted(slot):
            value = slot[key]
            if isinstance(value, np.ndarray):
                out.append((f"{prefix}/{i}/{key}", value))
    return out


def save_checkpoint(path, spec, params, optimizer_state=None, meta=None):
    tensors = _collect_tensors("param", params)
    scalars = {}
    if optimizer_state is not None:
        tensors += _collect_tensors("opt", optimizer_state["slots"])
        scalars = {k: v for k, v in optimizer_state.items() if k != "slots"}
        scalars["n_slots"] = len(optimizer_state["slots"])

    header = {
        "spec": spec.to_dict(),
        "tensors": [{"name": n, "shape": list(t.shape)} for n, t in tensors],
        "optimizer": scalars if optimizer_state is not None else None,
        "meta": meta or {},
    }
    blob = json.dumps(header).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        for _, t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path, expected_spec=None):
    """Returns (spec, params, optimizer_state, meta); optimizer_state may be None.

    Rejects corrupt files and, when expected_spec is given, any spec
    mismatch."""
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, blob_len = struct.unpack_from("<II", raw, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(raw[16:16 + blob_len].decode())
    spec = ModelSpec.from_dict(header["spec"])
    if expected_spec is not None and spec.to_dict() != expected_spec.to_dict():
        raise CheckpointError(f"{path}: checkpoint spec does not match the "
                              "requested model spec")

    offset = 16 + blob_len
    tensors = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if offset + 8 * count > len(raw):
            raise CheckpointError(f"{path}: truncated tensor {entry['name']}")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        tensors[entry["name"]] = arr.reshape(shape).copy()
        offset += 8 * count
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

    def unflatten(prefix, n_layers):
        slots = [dict() for _ in range(n_layers)]
        for name, t in tensors.items():
            p, i, key = name.split("/")
            if p == prefix:
                slots[int(i)][key] = t
        return slots

    params = unflatten("param", len(spec.layers))
    optimizer_state = None
    if header["optimizer"] is not None:
        scalars = dict(header["optimizer"])
        n_slots = scalars.pop("n_slots")
        optimizer_state = {"slots": unflatten("opt", n_slots), **scalars}
    return spec, params, optimizer_state, header["meta"]
