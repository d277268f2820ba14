import functools

import numpy as np
import pytest

from streams2s.metrics import (
    SHIFT_LADDER_S,
    commit_latency,
    corpus_wer,
    edit_distance,
    ideal_latency,
    latency,
    mean,
    shift_ladder,
    shifted_latency,
    wer,
)
from streams2s.models.common import InputError, Strategy
from streams2s.models.records import CommitLog, TokenTimestamps


def ts(times, duration):
    return TokenTimestamps(times_s=times, duration_s=duration)


def test_latency_examples():
    assert latency(ts([1.0, 2.0], 4.0)) == pytest.approx(0.375)
    assert latency(ts([4.0, 4.0, 4.0], 4.0)) == 1.0
    assert latency(ts([-1.0, 9.0], 4.0)) == pytest.approx(0.5)
    assert ideal_latency([0.5, 1.5], 2.0) == pytest.approx(0.5)
    with pytest.raises(InputError):
        ideal_latency([2.5], 2.0)


def test_timestamps_validation():
    with pytest.raises(ValueError):
        ts([], 1.0)
    with pytest.raises(ValueError):
        ts([0.5], 0.0)


def test_shifted_latency_clamps():
    base = ts([1.0, 3.0], 4.0)
    assert shifted_latency(base, 0.0) == pytest.approx(latency(base))
    assert shifted_latency(base, 2.0) == pytest.approx((3.0 + 4.0) / 8.0)
    assert shifted_latency(base, 100.0) == 1.0
    with pytest.raises(InputError):
        shifted_latency(base, -0.1)


def test_delay_shift_law():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        duration = float(rng.uniform(0.5, 10.0))
        n = int(rng.integers(1, 12))
        times = sorted(rng.uniform(0.0, duration, n))
        d = float(rng.uniform(0.0, 2.0))
        base = ts(list(times), duration)
        got = shifted_latency(base, d)
        assert latency(base) - 1e-12 <= got <= min(1.0, latency(base) + d / duration) + 1e-12
        if max(times) + d <= duration:
            assert got == pytest.approx(latency(base) + d / duration, rel=1e-12)


def test_commit_latency():
    log = CommitLog()
    assert commit_latency(log, 3.0) == 1.0
    log.extend([4, 5], 1000.0, Strategy.FIRST_RANKED)
    log.extend([6], 3000.0, Strategy.OFFLINE)
    assert commit_latency(log, 3.0) == pytest.approx((1 + 1 + 3) / 9)


def test_wer_examples():
    assert wer([1, 2, 3], [1, 2, 3]) == 0.0
    assert wer([1, 2, 3], [1, 3]) == pytest.approx(1 / 3)
    assert wer([1, 2], [3, 4, 5, 6]) == 2.0
    assert wer([1], []) == 1.0
    assert edit_distance([], [1, 2]) == 2
    with pytest.raises(InputError):
        wer([], [1])


def brute_force_distance(ref, hyp):
    """Smallest edit count by recursion over suffix pairs."""

    @functools.lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        return min(go(i + 1, j) + 1, go(i, j + 1) + 1, go(i + 1, j + 1) + (ref[i] != hyp[j]))

    return go(0, 0)


def test_edit_distance_matches_brute_force():
    rng = np.random.default_rng(6)
    for _ in range(500):
        ref = tuple(int(x) for x in rng.integers(0, 4, int(rng.integers(1, 9))))
        hyp = tuple(int(x) for x in rng.integers(0, 4, int(rng.integers(0, 9))))
        assert edit_distance(ref, hyp) == brute_force_distance(ref, hyp)


def test_corpus_wer_is_micro_averaged():
    pairs = [([1], [2]), ([1, 2, 3, 4], [1, 2, 3, 4])]
    assert corpus_wer(pairs) == pytest.approx(1 / 5)
    assert mean([wer(r, h) for r, h in pairs]) == pytest.approx(0.5)
    with pytest.raises(InputError):
        corpus_wer([])
    with pytest.raises(InputError):
        mean([])


def test_shift_ladder():
    alignments = [([0.5, 1.0], 2.0), ([1.0], 4.0)]
    ladder = shift_ladder(alignments)
    assert [d for d, _ in ladder] == list(SHIFT_LADDER_S)
    values = [v for _, v in ladder]
    assert values[0] == pytest.approx(mean([ideal_latency(t, dur) for t, dur in alignments]))
    assert values == sorted(values)
