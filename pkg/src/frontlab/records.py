"""Flat binary records: magic, header length, JSON header, float64 body."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


def write_record(path, magic: bytes, header: dict, arrays) -> None:
    shapes = [list(np.shape(a)) for a in arrays]
    head = dict(header)
    head["shapes"] = shapes
    blob = json.dumps(head, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_record(path, magic: bytes):
    raw = Path(path).read_bytes()
    if raw[: len(magic)] != magic:
        raise ConfigurationError(f"{path}: not a {magic.decode()} record")
    pos = len(magic)
    (n,) = struct.unpack("<I", raw[pos : pos + 4])
    pos += 4
    header = json.loads(raw[pos : pos + n])
    pos += n
    arrays = []
    for shape in header["shapes"]:
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape)
        arrays.append(a.astype(np.float64))
        pos += 8 * count
    return header, arrays
