from __future__ import annotations

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .common import InputError


class FeatureSequence(BaseModel):
    """Time-major feature frames (T_in x D) with the frame period in milliseconds."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    frames: np.ndarray
    frame_period_ms: float = Field(10.0, gt=0)

    @field_validator("frames")
    @classmethod
    def _matrix(cls, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InputError(f"feature frames must be a non-empty matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("feature frames contain NaN/Inf")
        v.setflags(write=False)
        return v

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    @property
    def duration_ms(self) -> float:
        return self.num_frames * self.frame_period_ms

    def head(self, n: int) -> "FeatureSequence":
        """The first `n` frames, as a stream has delivered them so far."""
        if not 1 <= n <= self.num_frames:
            raise InputError(f"cannot take {n} of {self.num_frames} frames")
        return FeatureSequence(frames=self.frames[:n], frame_period_ms=self.frame_period_ms)


class SyntheticUtterance(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    utt_id: str
    features: FeatureSequence
    reference: List[int]
    alignment: List[Tuple[float, float]]

    @property
    def duration_ms(self) -> float:
        return self.features.duration_ms

    @model_validator(mode="after")
    def _consistent(self) -> "SyntheticUtterance":
        if len(self.reference) != len(self.alignment):
            raise InputError(
                f"{self.utt_id}: {len(self.reference)} tokens but {len(self.alignment)} intervals"
            )
        prev_end = 0.0
        for i, (start, end) in enumerate(self.alignment):
            if not (prev_end <= start <= end <= self.duration_ms):
                raise InputError(f"{self.utt_id}: alignment interval {i} ({start}, {end}) out of order")
            prev_end = end
        return self

    def end_times_s(self) -> List[float]:
        return [end / 1000.0 for _, end in self.alignment]
