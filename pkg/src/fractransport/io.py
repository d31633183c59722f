"""Field dumps (CSV and a small binary format) and JSON helpers.

The binary layout is little-endian: 4-byte magic ``FTFD``, ``uint32``
version, ``uint64`` point count, ``float64`` period length, then the
samples as ``float64``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .spectral import Field, Grid

MAGIC = b"FTFD"
VERSION = 1
_HEADER = struct.Struct("<4sIQd")


def save_field_binary(path, f: Field) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, f.grid.n_points, f.grid.length))
        fh.write(np.asarray(f.values, dtype="<f8").tobytes())


def load_field_binary(path) -> Field:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, n, length = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = data[_HEADER.size:]
    if len(body) != 8 * n:
        raise ValueError(f"{path}: expected {n} samples, found {len(body) // 8}")
    return Field(Grid(int(n), float(length)), np.frombuffer(body, dtype="<f8").copy())


def save_field_csv(path, f: Field) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["x", "value"])
        for x, v in zip(f.grid.nodes, f.values):
            out.writerow([repr(float(x)), repr(float(v))])


def load_field_csv(path, length: float) -> Field:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return Field(Grid(len(rows), length), np.array([float(r["value"]) for r in rows]))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "value") and hasattr(o, "name"):
        return o.value
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
