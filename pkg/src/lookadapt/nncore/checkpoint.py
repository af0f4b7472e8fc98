"""Checkpoint files.

Layout: a magic line, an 8-byte little-endian manifest length, a JSON
manifest (name, shape, dtype, offset, nbytes per array), then the raw
little-endian array bytes.  Hyperparameters and fingerprints go to a
``key=value`` text sidecar next to the file (``<path>.meta``).
"""
from __future__ import annotations

import json
import struct
from typing import Dict, Optional, Tuple

import numpy as np

MAGIC = b"LOOKADAPT-CHECKPOINT v1\n"


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: Dict[str, np.ndarray], meta: Optional[Dict[str, object]] = None):
    manifest = []
    blobs = []
    offset = 0
    for name in arrays:
        a = np.asarray(arrays[name])
        dt = a.dtype.newbyteorder("<")
        raw = np.ascontiguousarray(a, dtype=dt).tobytes()
        manifest.append({"name": name, "shape": list(a.shape), "dtype": dt.str,
                         "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    head = json.dumps({"arrays": manifest}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for raw in blobs:
            fh.write(raw)
    if meta is not None:
        write_meta(str(path) + ".meta", meta)


def load_arrays(path) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    (n,) = struct.unpack("<Q", data[pos:pos + 8])
    pos += 8
    manifest = json.loads(data[pos:pos + n])
    base = pos + n
    arrays = {}
    for rec in manifest["arrays"]:
        start = base + rec["offset"]
        buf = data[start:start + rec["nbytes"]]
        if len(buf) != rec["nbytes"]:
            raise CheckpointError(f"{path}: truncated array {rec['name']!r}")
        arrays[rec["name"]] = np.frombuffer(buf, dtype=np.dtype(rec["dtype"])).reshape(rec["shape"]).copy()
    meta = {}
    try:
        meta = read_meta(str(path) + ".meta")
    except FileNotFoundError:
        pass
    return arrays, meta


def write_meta(path, meta: Dict[str, object]):
    with open(path, "w", encoding="utf-8") as fh:
        for k in sorted(meta):
            fh.write(f"{k}={meta[k]}\n")


def read_meta(path) -> Dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#") and "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def save_params(path, store, meta=None, names=None):
    save_arrays(path, store.state(names), meta)


def load_params(path, store, strict: bool = True) -> Dict[str, str]:
    arrays, meta = load_arrays(path)
    store.load_state(arrays, strict=strict)
    return meta
