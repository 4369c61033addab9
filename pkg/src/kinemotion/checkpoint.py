"""Binary checkpoints: one JSON header line followed by raw float64 data.

The header holds the format version, the network hyperparameters, a tensor
manifest ``name -> {shape, offset}`` (offsets in bytes from the start of the
data block) and optional extras such as the skeleton and training config.
Data is little-endian 64-bit floats, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ahmr import HyperParams

VERSION = 1
_DTYPE = np.dtype("<f8")


@dataclass
class Checkpoint:
    hyper: HyperParams
    params: dict
    extra: dict = field(default_factory=dict)


def save(path, hyper: HyperParams, params, **extra):
    manifest, blobs, offset = {}, [], 0
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype=_DTYPE)
        manifest[name] = {"shape": list(arr.shape), "offset": offset}
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {"version": VERSION, "hyper": hyper.to_dict(), "tensors": manifest, "extra": extra}
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def load(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    split = raw.index(b"\n")
    header = json.loads(raw[:split].decode("utf-8"))
    if header.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {header.get('version')!r}")
    data = raw[split + 1 :]
    params = {}
    for name, entry in header["tensors"].items():
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=int))
        start = entry["offset"]
        end = start + count * _DTYPE.itemsize
        if end > len(data):
            raise ValueError(f"checkpoint truncated in tensor {name!r}")
        params[name] = np.frombuffer(data[start:end], dtype=_DTYPE).reshape(shape).astype(np.float64)
    return Checkpoint(HyperParams(**header["hyper"]), params, header.get("extra", {}))
