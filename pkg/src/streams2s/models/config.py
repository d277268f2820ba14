from __future__ import annotations

import math
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .common import BackwardInit, EncoderPolicy, Strategy, format_delta


class ConfigError(ValueError):
    pass


# Feature layout shared by the corpus generator and the toy model: the last
# POSITION_DIMS + COARSE_DIMS columns carry the position codes, the rest the token signature.
POSITION_DIMS = 16
COARSE_DIMS = 2


class EncoderConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    policy: EncoderPolicy = EncoderPolicy.BIDIRECTIONAL
    layers: int = Field(2, ge=1)
    hidden: int = Field(32, ge=1)
    downsample: int = Field(4, ge=1)
    chunk_size: int = Field(80, ge=1)
    backward_init: BackwardInit = BackwardInit.PREVIOUS_CHUNK

    @property
    def directions(self) -> int:
        return 1 if self.policy is EncoderPolicy.UNIDIRECTIONAL else 2

    @property
    def output_hidden(self) -> int:
        return self.hidden * self.directions


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    vocab_size: int = Field(32, ge=1)
    feature_dim: int = Field(40, ge=POSITION_DIMS + COARSE_DIMS + 2)
    frame_period_ms: float = Field(10.0, gt=0)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    decoder_layers: int = Field(2, ge=1)
    decoder_hidden: int = Field(32, ge=1)
    embedding_dim: int = Field(16, ge=1)
    max_positions: int = Field(64, ge=2)
    signature_seed: int = 0

    @property
    def bos_id(self) -> int:
        return self.vocab_size

    @property
    def eos_id(self) -> int:
        return self.vocab_size + 1

    @property
    def output_size(self) -> int:
        return self.vocab_size + 2

    @property
    def d_model(self) -> int:
        return self.feature_dim

    @property
    def signature_dims(self) -> int:
        return self.feature_dim - POSITION_DIMS - COARSE_DIMS

    @property
    def encoder_frame_ms(self) -> float:
        return self.frame_period_ms * self.encoder.downsample


class SearchConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    beam_size: int = Field(8, ge=1)
    theta: float = Field(0.95, gt=0.0, le=1.0)
    delta_immortal: float = Field(math.inf, ge=0)
    delta_first_ranked: float = Field(math.inf, ge=0)
    strategy: Strategy = Strategy.OFFLINE
    max_tokens: int = Field(64, ge=1)

    @property
    def delta_label(self) -> str:
        if self.strategy is Strategy.IMMORTAL:
            return format_delta(self.delta_immortal)
        if self.strategy is Strategy.FIRST_RANKED:
            return format_delta(self.delta_first_ranked)
        if self.strategy is Strategy.COMBINED:
            return f"{format_delta(self.delta_immortal)}-{format_delta(self.delta_first_ranked)}"
        return "-"


class ConstraintLossConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.05, ge=0)


class CorpusConfig(BaseModel):
    """Synthetic corpus layout. Durations of segments are in encoder frames."""

    model_config = ConfigDict(frozen=True)

    seed: int = 0
    count: int = Field(100, ge=1)
    min_duration_ms: float = Field(2000.0, gt=0)
    max_duration_ms: float = Field(8000.0, gt=0)
    vocab_size: int = Field(32, ge=1)
    feature_dim: int = Field(40, ge=POSITION_DIMS + COARSE_DIMS + 2)
    frame_period_ms: float = Field(10.0, gt=0)
    downsample: int = Field(4, ge=1)
    min_token_frames: int = Field(6, ge=1)
    max_token_frames: int = Field(12, ge=1)
    max_pause_frames: int = Field(12, ge=0)
    lead_frames: int = Field(4, ge=0)
    eos_frames: int = Field(6, ge=1)
    noise: float = Field(0.05, ge=0)
    signature_seed: int = 0

    @property
    def encoder_frame_ms(self) -> float:
        return self.frame_period_ms * self.downsample

    def check(self) -> None:
        if self.min_duration_ms > self.max_duration_ms:
            raise ConfigError(
                f"duration range is empty: {self.min_duration_ms} > {self.max_duration_ms}"
            )
        if self.min_token_frames > self.max_token_frames:
            raise ConfigError(
                f"token length range is empty: {self.min_token_frames} > {self.max_token_frames}"
            )
        shortest = (self.lead_frames + self.max_token_frames + self.max_pause_frames
                    + self.eos_frames) * self.encoder_frame_ms
        if self.min_duration_ms < shortest:
            raise ConfigError(
                f"min_duration_ms={self.min_duration_ms} cannot hold one token (needs {shortest} ms)"
            )

    @classmethod
    def for_model(cls, model: ModelConfig, **overrides: object) -> "CorpusConfig":
        base = dict(
            vocab_size=model.vocab_size,
            feature_dim=model.feature_dim,
            frame_period_ms=model.frame_period_ms,
            downsample=model.encoder.downsample,
            signature_seed=model.signature_seed,
        )
        base.update(overrides)
        return cls(**base)  # type: ignore[arg-type]


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    tick_ms: float = Field(250.0, gt=0)


class SweepSetting(BaseModel):
    model_config = ConfigDict(frozen=True)

    strategy: Strategy
    beam_size: int = Field(8, ge=1)
    delta_immortal: float = Field(math.inf, ge=0)
    delta_first_ranked: float = Field(math.inf, ge=0)

    def search_config(self, theta: float = 0.95, max_tokens: int = 64) -> SearchConfig:
        return SearchConfig(
            beam_size=self.beam_size,
            theta=theta,
            delta_immortal=self.delta_immortal,
            delta_first_ranked=self.delta_first_ranked,
            strategy=self.strategy,
            max_tokens=max_tokens,
        )

    @property
    def label(self) -> str:
        return f"{self.strategy.value}/b{self.beam_size}/{self.search_config().delta_label}"


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    settings: List[SweepSetting]
    theta: float = Field(0.95, gt=0.0, le=1.0)
    max_tokens: int = Field(64, ge=1)
    tick_ms: float = Field(250.0, gt=0)
    workers: int = Field(1, ge=1)

    @field_validator("settings")
    @classmethod
    def _non_empty(cls, v: List[SweepSetting]) -> List[SweepSetting]:
        if not v:
            raise ValueError("a sweep needs at least one setting")
        return v

    @classmethod
    def grid(
        cls,
        strategies: List[Strategy],
        beams: List[int],
        deltas: List[float],
        pairs: Optional[List[Tuple[float, float]]] = None,
        **kwargs: object,
    ) -> "SweepSpec":
        """Cartesian product of strategies, beams and deltas. `combined` takes its
        (immortal, first_ranked) delta pairs from `pairs` instead of `deltas`."""
        settings: List[SweepSetting] = []
        for strategy in strategies:
            for beam in beams:
                if strategy is Strategy.OFFLINE:
                    settings.append(SweepSetting(strategy=strategy, beam_size=beam))
                    continue
                if strategy is Strategy.COMBINED:
                    for d_imm, d_fr in pairs or [(20.0, 70.0)]:
                        settings.append(SweepSetting(
                            strategy=strategy, beam_size=beam,
                            delta_immortal=d_imm, delta_first_ranked=d_fr,
                        ))
                    continue
                for d in deltas:
                    if strategy is Strategy.IMMORTAL:
                        s = SweepSetting(strategy=strategy, beam_size=beam, delta_immortal=d)
                    else:
                        s = SweepSetting(strategy=strategy, beam_size=beam, delta_first_ranked=d)
                    settings.append(s)
        return cls(settings=settings, **kwargs)  # type: ignore[arg-type]

    @model_validator(mode="after")
    def _unique_labels(self) -> "SweepSpec":
        labels = [s.label for s in self.settings]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate sweep settings")
        return self
