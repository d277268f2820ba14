"""Normalized token latency and word error rate.

Latency is sum(t_i) / (n * T) with every t_i clamped to [0, T]: an offline recognizer,
which emits everything at T, always scores 1.
"""
from __future__ import annotations

from typing import Iterable, List, Sequence, Tuple

from .models.common import InputError
from .models.records import CommitLog, TokenTimestamps

SHIFT_LADDER_S: Tuple[float, ...] = (0.0, 0.25, 0.5, 1.0, 1.5)


def latency(ts: TokenTimestamps) -> float:
    times = ts.clamped()
    return sum(times) / (len(times) * ts.duration_s)


def ideal_latency(end_times_s: Sequence[float], duration_s: float) -> float:
    for t in end_times_s:
        if not 0.0 <= t <= duration_s:
            raise InputError(f"alignment time {t} outside [0, {duration_s}]")
    return latency(TokenTimestamps(times_s=list(end_times_s), duration_s=duration_s))


def shifted_latency(ts: TokenTimestamps, d: float) -> float:
    if d < 0:
        raise InputError(f"delay must be >= 0, got {d}")
    shifted = [min(t + d, ts.duration_s) for t in ts.times_s]
    return latency(TokenTimestamps(times_s=shifted, duration_s=ts.duration_s))


def commit_latency(commits: CommitLog, duration_s: float) -> float:
    """Latency of a commit log; an empty transcript counts as offline."""
    if not commits.entries:
        return 1.0
    times = [e.stream_time_ms / 1000.0 for e in commits.entries]
    return latency(TokenTimestamps(times_s=times, duration_s=duration_s))


def edit_distance(reference: Sequence[int], hypothesis: Sequence[int]) -> int:
    prev = list(range(len(hypothesis) + 1))
    for i, r in enumerate(reference, 1):
        cur = [i] + [0] * len(hypothesis)
        for j, h in enumerate(hypothesis, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return prev[-1]


def wer(reference: Sequence[int], hypothesis: Sequence[int]) -> float:
    if not reference:
        raise InputError("empty reference")
    return edit_distance(reference, hypothesis) / len(reference)


def corpus_wer(pairs: Iterable[Tuple[Sequence[int], Sequence[int]]]) -> float:
    """Total edits over total reference tokens."""
    errors, total = 0, 0
    for ref, hyp in pairs:
        errors += edit_distance(ref, hyp)
        total += len(ref)
    if not total:
        raise InputError("empty reference")
    return errors / total


def mean(values: Sequence[float]) -> float:
    if not values:
        raise InputError("mean of nothing")
    return sum(values) / len(values)


def shift_ladder(alignments: Sequence[Tuple[Sequence[float], float]],
                 delays: Sequence[float] = SHIFT_LADDER_S) -> List[Tuple[float, float]]:
    """Corpus latency of the instant recognizer delayed by each d in `delays`."""
    out = []
    for d in delays:
        vals = [shifted_latency(TokenTimestamps(times_s=list(t), duration_s=dur), d)
                for t, dur in alignments]
        out.append((d, mean(vals)))
    return out
