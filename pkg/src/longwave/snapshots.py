"""Flat binary snapshots with a self-describing JSON header.

Layout: magic ``b"LWDF"``, little-endian u32 format version, u32 header
length, UTF-8 JSON header, then the array as little-endian float64 in C
order.  The header always carries ``shape``; callers add grid bounds, ``eps``
and ``t`` as needed.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LWDF"
VERSION = 1


class SnapshotError(ValueError):
    pass


def write_snapshot(path, array: np.ndarray, header: dict | None = None) -> Path:
    path = Path(path)
    arr = np.ascontiguousarray(array, dtype="<f8")
    meta = dict(header or {})
    meta["shape"] = list(arr.shape)
    blob = json.dumps(meta, sort_keys=True).encode()
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(blob)))
        fh.write(blob)
        fh.write(arr.tobytes())
    return path


def read_snapshot(path) -> tuple[np.ndarray, dict]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise SnapshotError(f"{path}: not a snapshot file")
    version, hlen = struct.unpack("<II", data[4:12])
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    meta = json.loads(data[12 : 12 + hlen])
    shape = tuple(meta["shape"])
    arr = np.frombuffer(data[12 + hlen :], dtype="<f8")
    if arr.size != int(np.prod(shape)):
        raise SnapshotError(f"{path}: payload size {arr.size} does not match shape {shape}")
    return arr.reshape(shape).copy(), meta
