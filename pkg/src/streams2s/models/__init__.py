from .common import EncoderPolicy, BackwardInit, Strategy, InputError
from .config import (
    ConfigError,
    EncoderConfig,
    ModelConfig,
    SearchConfig,
    ConstraintLossConfig,
    CorpusConfig,
    RunConfig,
    SweepSetting,
    SweepSpec,
)
from .features import FeatureSequence, SyntheticUtterance
from .records import CommitEntry, CommitLog, TokenTimestamps, LatencyRow, LatencyReport

__all__ = [
    "EncoderPolicy",
    "BackwardInit",
    "Strategy",
    "InputError",
    "ConfigError",
    "EncoderConfig",
    "ModelConfig",
    "SearchConfig",
    "ConstraintLossConfig",
    "CorpusConfig",
    "RunConfig",
    "SweepSetting",
    "SweepSpec",
    "FeatureSequence",
    "SyntheticUtterance",
    "CommitEntry",
    "CommitLog",
    "TokenTimestamps",
    "LatencyRow",
    "LatencyReport",
]
