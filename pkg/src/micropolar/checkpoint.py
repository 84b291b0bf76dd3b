"""Binary field checkpoints.

Layout (little endian)::

    b"CCNV"  u32 version  u32 n  u32 field_count
    repeated field_count times:
        u32 name_length  name (ASCII)  n*n float64 samples, row-major

Scalars (time, parameters) are stored as constant fields so that any reader
of the format can recover them without a side channel.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"CCNV"
VERSION = 1


class CheckpointError(ValueError):
    pass


def write_checkpoint(path, fields: dict[str, np.ndarray], scalars: dict[str, float] | None = None) -> Path:
    path = Path(path)
    items = list(fields.items())
    if not items and not scalars:
        raise CheckpointError("nothing to write")
    n = items[0][1].shape[0] if items else 8
    for name, value in scalars.items() if scalars else ():
        items.append((name, np.full((n, n), float(value))))
    chunks = [MAGIC, struct.pack("<III", VERSION, n, len(items))]
    for name, arr in items:
        arr = np.asarray(arr)
        if arr.shape != (n, n) or np.iscomplexobj(arr):
            raise CheckpointError(f"field {name!r} must be a real {n}x{n} array")
        raw = name.encode("ascii")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)
    return path


def read_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}")
    version, n, count = struct.unpack_from("<III", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    pos = 16
    out: dict[str, np.ndarray] = {}
    size = n * n * 8
    for _ in range(count):
        (length,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + length].decode("ascii")
        pos += length
        if pos + size > len(data):
            raise CheckpointError(f"{path}: truncated field {name!r}")
        out[name] = np.frombuffer(data, dtype="<f8", count=n * n, offset=pos).reshape(n, n).astype(float)
        pos += size
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return out


def scalar(fields: dict[str, np.ndarray], name: str) -> float:
    return float(fields[name][0, 0])
