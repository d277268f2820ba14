from __future__ import annotations

from typing import ClassVar, Iterable, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .common import InputError, Strategy


class CommitEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    token: int = Field(..., ge=0)
    stream_time_ms: float = Field(..., ge=0)
    strategy: Strategy

    def to_line(self) -> str:
        return f"{self.stream_time_ms:g}\t{self.token}\t{self.strategy.value}"

    @classmethod
    def from_line(cls, line: str) -> "CommitEntry":
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise InputError(f"commit line needs 3 tab-separated fields: {line!r}")
        return cls(stream_time_ms=float(parts[0]), token=int(parts[1]), strategy=Strategy(parts[2]))


class CommitLog(BaseModel):
    """Append-only record of committed tokens."""

    entries: List[CommitEntry] = Field(default_factory=list)

    @property
    def committed_prefix(self) -> List[int]:
        return [e.token for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def extend(self, tokens: Iterable[int], stream_time_ms: float, strategy: Strategy) -> List[CommitEntry]:
        if self.entries and stream_time_ms < self.entries[-1].stream_time_ms:
            raise InputError(
                f"commit time {stream_time_ms} precedes last commit {self.entries[-1].stream_time_ms}"
            )
        new = [CommitEntry(token=t, stream_time_ms=stream_time_ms, strategy=strategy) for t in tokens]
        self.entries.extend(new)
        return new

    def to_text(self) -> str:
        return "".join(e.to_line() + "\n" for e in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "CommitLog":
        return cls(entries=[CommitEntry.from_line(l) for l in text.splitlines() if l.strip()])


class TokenTimestamps(BaseModel):
    model_config = ConfigDict(frozen=True)

    times_s: List[float]
    duration_s: float

    @field_validator("times_s")
    @classmethod
    def _non_empty(cls, v: List[float]) -> List[float]:
        if not v:
            raise InputError("no token timestamps")
        return v

    @field_validator("duration_s")
    @classmethod
    def _positive(cls, v: float) -> float:
        if not v > 0:
            raise InputError(f"utterance duration must be positive, got {v}")
        return v

    def clamped(self) -> List[float]:
        return [min(max(t, 0.0), self.duration_s) for t in self.times_s]


class LatencyRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    utt_id: str
    strategy: str
    beam: int
    delta: str
    wer: float
    latency: float
    errors: int = 0
    ref_len: int = 0

    CSV_HEADER: ClassVar[str] = "utt_id,strategy,beam,delta,wer,latency"

    def to_csv(self) -> str:
        return f"{self.utt_id},{self.strategy},{self.beam},{self.delta},{self.wer:.6f},{self.latency:.6f}"


class LatencyReport(BaseModel):
    """Per-utterance rows of one setting plus the corpus summary."""

    strategy: str
    beam: int
    delta: str
    rows: List[LatencyRow] = Field(default_factory=list)
    ideal_latency: Optional[float] = None
    violations: List[str] = Field(default_factory=list)

    @property
    def mean_latency(self) -> float:
        return sum(r.latency for r in self.rows) / len(self.rows)

    @property
    def corpus_wer(self) -> float:
        ref = sum(r.ref_len for r in self.rows)
        return sum(r.errors for r in self.rows) / ref if ref else 0.0

    def summary_row(self) -> LatencyRow:
        return LatencyRow(
            utt_id="__corpus__",
            strategy=self.strategy,
            beam=self.beam,
            delta=self.delta,
            wer=self.corpus_wer,
            latency=self.mean_latency,
            errors=sum(r.errors for r in self.rows),
            ref_len=sum(r.ref_len for r in self.rows),
        )
