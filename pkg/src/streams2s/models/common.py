from __future__ import annotations
import math
from enum import Enum


class InputError(ValueError):
    pass


class EncoderPolicy(str, Enum):
    UNIDIRECTIONAL = "unidirectional"
    BIDIRECTIONAL = "bidirectional"
    CHUNKED = "chunked"


class BackwardInit(str, Enum):
    CONSTANT = "constant"
    PREVIOUS_CHUNK = "previous_chunk"


class Strategy(str, Enum):
    IMMORTAL = "immortal"
    FIRST_RANKED = "first_ranked"
    COMBINED = "combined"
    OFFLINE = "offline"


def format_delta(delta: float) -> str:
    if math.isinf(delta):
        return "inf"
    if float(delta).is_integer():
        return str(int(delta))
    return str(delta)


def parse_delta(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(text)
