from __future__ import annotations

from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from ..models.features import FeatureSequence
from .codecs.cursor import Cursor
from .codecs.tensor_codec import decode_tensor
from .writer import FEATURES_MAGIC, FORMAT_VERSION, WEIGHTS_MAGIC

BytesLike = Union[str, Path, bytes, bytearray, memoryview]


class ContainerError(ValueError):
    pass


def _load_bytes(inp: BytesLike) -> bytes:
    if isinstance(inp, (bytes, bytearray, memoryview)):
        return bytes(inp)
    return Path(str(inp)).read_bytes()


def _check_header(cur: Cursor, magic: bytes, what: str) -> None:
    if cur.remaining() < len(magic) + 2 or cur.peek(len(magic)) != magic:
        raise ContainerError(f"not a {what} container (bad magic)")
    cur.skip(len(magic))
    version = cur.u16()
    if version != FORMAT_VERSION:
        raise ContainerError(f"{what} container version {version} unsupported")


def read_weight_container(data: BytesLike) -> Tuple[str, Dict[str, np.ndarray]]:
    """Returns (config JSON, name -> tensor)."""
    cur = Cursor(_load_bytes(data))
    _check_header(cur, WEIGHTS_MAGIC, "weight")
    try:
        cfg_len = cur.u32()
        config_json = cur.take(cfg_len).decode("utf-8")
        count = cur.u32()
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            start = cur.tell()
            name, arr = decode_tensor(cur)
            if name in tensors:
                raise ContainerError(f"duplicate tensor {name!r} at offset {start}")
            tensors[name] = arr
    except ContainerError:
        raise
    except ValueError as e:
        raise ContainerError(f"truncated weight container at offset {cur.tell()}: {e}") from e
    if cur.remaining():
        raise ContainerError(f"{cur.remaining()} trailing bytes after last tensor")
    return config_json, tensors


def read_feature_file(data: BytesLike) -> FeatureSequence:
    cur = Cursor(_load_bytes(data))
    _check_header(cur, FEATURES_MAGIC, "feature")
    try:
        period = cur.f64()
        _, frames = decode_tensor(cur)
    except ValueError as e:
        raise ContainerError(f"truncated feature container at offset {cur.tell()}: {e}") from e
    return FeatureSequence(frames=frames, frame_period_ms=period)
