from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

from ..metrics import commit_latency, edit_distance
from ..model import ModelWeights
from ..models.config import ConfigError, RunConfig
from ..models.features import SyntheticUtterance
from ..models.records import CommitLog, LatencyRow
from ..search import SearchError, StreamDecoder, TickResult

log = logging.getLogger(__name__)


class StreamError(RuntimeError):
    pass


@dataclass
class StreamOutcome:
    utt_id: str
    transcript: Tuple[int, ...]
    commits: CommitLog
    row: LatencyRow
    # committed prefix after every tick
    snapshots: List[Tuple[int, ...]] = field(default_factory=list)
    violations: List[str] = field(default_factory=list)


def tick_frames(total_frames: int, tick_ms: float, frame_period_ms: float) -> List[int]:
    """Cumulative input frame counts at each tick boundary; the last one is the whole stream."""
    out: List[int] = []
    k = 1
    while True:
        n = min(int(k * tick_ms // frame_period_ms), total_frames)
        if n > (out[-1] if out else 0):
            out.append(n)
        if n >= total_frames:
            return out
        k += 1


def check_commit_safety(snapshots: List[Tuple[int, ...]], transcript: Tuple[int, ...],
                        commits: CommitLog) -> List[str]:
    problems = []
    prev: Tuple[int, ...] = ()
    for i, snap in enumerate(snapshots):
        if snap[: len(prev)] != prev:
            problems.append(f"tick {i}: committed prefix shrank or changed")
        if transcript[: len(snap)] != snap:
            problems.append(f"tick {i}: committed prefix {list(snap)} is not a prefix of the transcript")
        prev = snap
    times = [e.stream_time_ms for e in commits.entries]
    if any(b < a for a, b in zip(times, times[1:])):
        problems.append("commit times decrease")
    if tuple(commits.committed_prefix) != transcript:
        problems.append("commit log does not spell the transcript")
    return problems


def run_stream(utt: SyntheticUtterance, model: ModelWeights, cfg: RunConfig) -> StreamOutcome:
    """Feeds `utt` in tick_ms increments and decodes it with cfg.search."""
    if cfg.encoder != model.config.encoder:
        raise ConfigError(
            f"run config encoder {cfg.encoder.policy.value} does not match the model's "
            f"{model.config.encoder.policy.value}"
        )
    feats = utt.features
    snapshots: List[Tuple[int, ...]] = []
    try:
        dec = StreamDecoder(model, cfg.search)
        res: TickResult
        for n in tick_frames(feats.num_frames, cfg.tick_ms, feats.frame_period_ms):
            res = dec.feed(feats.head(n), stream_closed=n == feats.num_frames)
            snapshots.append(dec.search.committed)
    except (ValueError, SearchError) as e:
        raise StreamError(f"{utt.utt_id}: {e}") from e

    transcript = res.best.tokens
    commits = dec.commit_log
    errors = edit_distance(utt.reference, transcript)
    search = cfg.search
    row = LatencyRow(
        utt_id=utt.utt_id,
        strategy=search.strategy.value,
        beam=search.beam_size,
        delta=search.delta_label,
        wer=errors / len(utt.reference),
        latency=commit_latency(commits, utt.duration_ms / 1000.0),
        errors=errors,
        ref_len=len(utt.reference),
    )
    violations = [f"{utt.utt_id}: {p}" for p in check_commit_safety(snapshots, transcript, commits)]
    for v in violations:
        log.warning("%s", v)
    return StreamOutcome(utt.utt_id, transcript, commits, row, snapshots, violations)
