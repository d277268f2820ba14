from __future__ import annotations

import struct
from typing import Mapping

import numpy as np

from ..models.features import FeatureSequence
from .codecs.tensor_codec import encode_tensor

WEIGHTS_MAGIC = b"S2SW"
FEATURES_MAGIC = b"S2SF"
FORMAT_VERSION = 1


def write_weight_container(config_json: str, tensors: Mapping[str, np.ndarray]) -> bytes:
    """magic, u16 version, u32 config length, config JSON, u32 tensor count, tensors.

    Tensors are written in name order so equal weights give equal bytes.
    """
    cfg = config_json.encode("utf-8")
    out = bytearray(WEIGHTS_MAGIC)
    out += struct.pack("<HI", FORMAT_VERSION, len(cfg))
    out += cfg
    out += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        out += encode_tensor(name, tensors[name])
    return bytes(out)


def write_feature_file(feats: FeatureSequence) -> bytes:
    out = bytearray(FEATURES_MAGIC)
    out += struct.pack("<Hd", FORMAT_VERSION, feats.frame_period_ms)
    out += encode_tensor("frames", feats.frames)
    return bytes(out)
