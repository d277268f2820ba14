from __future__ import annotations

import struct

import numpy as np

from .cursor import Cursor

# Tensor record: u16 name length, utf-8 name, u8 rank, rank x u32 dims,
# then prod(dims) float64 values, row-major, little-endian.
MAX_RANK = 8


def encode_tensor(name: str, array: np.ndarray) -> bytes:
    raw_name = name.encode("utf-8")
    a = np.ascontiguousarray(array, dtype="<f8")
    if a.ndim > MAX_RANK:
        raise ValueError(f"tensor {name!r} has rank {a.ndim} > {MAX_RANK}")
    out = bytearray()
    out += struct.pack("<H", len(raw_name))
    out += raw_name
    out += struct.pack("<B", a.ndim)
    for d in a.shape:
        out += struct.pack("<I", d)
    out += a.tobytes(order="C")
    return bytes(out)


def decode_tensor(cur: Cursor) -> tuple[str, np.ndarray]:
    name_len = cur.u16()
    name = cur.take(name_len).decode("utf-8")
    rank = cur.u8()
    if rank > MAX_RANK:
        raise ValueError(f"tensor {name!r} declares rank {rank} at offset {cur.tell()}")
    dims = tuple(cur.u32() for _ in range(rank))
    count = int(np.prod(dims)) if dims else 1
    values = np.frombuffer(cur.take(8 * count), dtype="<f8").astype(np.float64)
    return name, values.reshape(dims)
