import itertools
import math

import numpy as np
import pytest

from streams2s.endpointing import EndpointState
from streams2s.harness.checks import TableScorer, exhaustive_best, oracle_check, random_score_table
from streams2s.harness.stream import tick_frames
from streams2s.models.common import InputError, Strategy
from streams2s.models.config import SearchConfig
from streams2s.search import (
    Hypothesis,
    PrefixStateCache,
    SearchError,
    StreamDecoder,
    StreamingSearch,
    beam_search,
    beam_step,
    best_of,
    combined_commit,
    decode_offline,
    first_ranked_commit,
    immortal_prefix_commit,
    rescore,
)

ROOT = Hypothesis(tokens=(), score=0.0)
FIXED = EndpointState(t_c=1, last_observed_t=10, fixed=True)
OPEN = EndpointState(t_c=1, last_observed_t=10, fixed=False)


def test_beam_one_is_greedy():
    table = random_score_table(np.random.default_rng(2), 4, 5)
    best = beam_search(TableScorer(table), ROOT, beam_size=1, max_tokens=5)
    prev, want = 0, []
    for step in range(5):
        tok = int(np.argmax(table[step, prev]))
        want.append(tok)
        prev = tok
    assert best.tokens == tuple(want)


def test_wide_beam_matches_exhaustive():
    table = random_score_table(np.random.default_rng(3), 2, 3)
    best = beam_search(TableScorer(table), ROOT, beam_size=8, max_tokens=3)
    tokens, score = exhaustive_best(table)
    assert best.tokens == tokens
    assert best.score == pytest.approx(score, rel=1e-12)


def test_ties_break_to_smallest_token_sequence():
    table = np.full((3, 3, 3), math.log(1 / 3))
    assert beam_search(TableScorer(table), ROOT, beam_size=2, max_tokens=3).tokens == (0, 0, 0)


def test_oracle_check_agrees():
    assert oracle_check(seed=0, count=200) == []


def test_beam_step_masks_and_finishes():
    table = np.log(np.array([[[0.1, 0.2, 0.7]]]))
    out = beam_step([ROOT], TableScorer(table), beam_size=3, eos_id=2)
    assert out[0].finished and out[0].tokens == ()
    assert out[0].score == pytest.approx(math.log(0.7))
    assert [h.tokens for h in out[1:]] == [(1,), (0,)]

    out = beam_step([ROOT], TableScorer(table), beam_size=3, eos_id=2, allow_eos=False, masked=(1,))
    assert [h.tokens for h in out] == [(0,)]


def test_beam_step_errors():
    table = np.zeros((1, 1, 1))
    with pytest.raises(SearchError):
        beam_step([], TableScorer(table), 1)
    with pytest.raises(SearchError):
        beam_step([Hypothesis(tokens=(), score=0.0, finished=True)], TableScorer(table), 1)
    with pytest.raises(SearchError):
        beam_step([Hypothesis(tokens=(1,), score=0.0)], TableScorer(table), 1, prefix=(0,))


def test_immortal_prefix_commit():
    a = Hypothesis(tokens=(1, 2, 3), score=-1.0, endpoints=(FIXED, FIXED, OPEN))
    b = Hypothesis(tokens=(1, 2, 4), score=-2.0, endpoints=(FIXED, OPEN, OPEN))
    assert immortal_prefix_commit([b, a]) == 2
    a2 = Hypothesis(tokens=(1, 2, 3), score=-1.0, endpoints=(FIXED, OPEN, OPEN))
    assert immortal_prefix_commit([a2, b]) == 1
    c = Hypothesis(tokens=(5, 2), score=-3.0, endpoints=(FIXED, FIXED))
    assert immortal_prefix_commit([a, c]) == 0
    assert immortal_prefix_commit([a, c], committed=0) == 0
    assert immortal_prefix_commit([a], committed=3) == 3
    with pytest.raises(SearchError):
        immortal_prefix_commit([])


def test_first_ranked_commit():
    best = Hypothesis(tokens=(4, 5, 6), score=0.0, covers=(3, 12, 30))
    assert first_ranked_commit(best, t=40, delta=20) == 2
    assert first_ranked_commit(best, t=40, delta=20, committed=2) == 2
    assert first_ranked_commit(best, t=60, delta=20) == 3
    assert first_ranked_commit(best, t=60, delta=math.inf) == 0
    blind = Hypothesis(tokens=(4,), score=0.0, covers=(-1,))
    assert first_ranked_commit(blind, t=100, delta=0) == 0


def test_combined_commit_takes_the_further_rule():
    a = Hypothesis(tokens=(1, 2, 3), score=-1.0, covers=(3, 12, 30), endpoints=(FIXED, OPEN, OPEN))
    b = Hypothesis(tokens=(1, 2, 4), score=-2.0, covers=(3, 12, 31), endpoints=(FIXED, OPEN, OPEN))
    cfg = SearchConfig(strategy=Strategy.COMBINED, delta_immortal=20, delta_first_ranked=20)
    assert combined_commit([a, b], 40, cfg) == (2, Strategy.FIRST_RANKED)
    assert combined_commit([a, b], 20, cfg) == (1, Strategy.IMMORTAL)
    strict = cfg.model_copy(update={"delta_first_ranked": math.inf})
    assert combined_commit([a, b], 40, strict) == (1, Strategy.IMMORTAL)


class ScriptedScorer:
    """Prefers `script[i]` (then end-of-sentence) with point attention at the token's frame,
    clamped to what has been seen so far. End-of-sentence is near impossible before its turn."""

    def __init__(self, script, frames, eos):
        self.script, self.frames, self.eos = script, frames, eos
        self.frontier = 0

    def score(self, hyp):
        i = len(hyp.tokens)
        want = self.script[i] if i < len(self.script) else self.eos
        probs = np.full(self.eos + 1, 0.1)
        if want != self.eos:
            probs[self.eos] = 1e-6
        probs[want] = 0.8
        frame = self.frames[i] if i < len(self.frames) else self.frontier - 1
        attn = np.zeros(self.frontier)
        attn[min(frame, self.frontier - 1)] = 1.0
        return np.log(probs), attn

    def advance(self, hyp, token):
        return None


def replay(strategy, **deltas):
    scorer = ScriptedScorer((0, 1, 0, 1), (3, 12, 30, 41), eos=2)
    cfg = SearchConfig(strategy=strategy, beam_size=4, max_tokens=16, **deltas)
    search = StreamingSearch(cfg=cfg, eos_id=2)
    per_tick = []
    for t in range(5, 85, 5):
        scorer.frontier = t
        res = search.tick(scorer, t, t * 40.0, closed=t == 80)
        per_tick.append((t, [e.token for e in res.committed]))
    return search, per_tick


def test_first_ranked_replay():
    search, per_tick = replay(Strategy.FIRST_RANKED, delta_first_ranked=20)
    committed_at = {t: toks for t, toks in per_tick if toks}
    assert committed_at == {25: [0], 35: [1], 55: [0], 65: [1]}
    entries = search.commits.entries
    assert [e.stream_time_ms for e in entries] == [1000.0, 1400.0, 2200.0, 2600.0]
    assert all(e.strategy is Strategy.FIRST_RANKED for e in entries)
    assert search.final.tokens == (0, 1, 0, 1)


def test_offline_strategy_commits_only_at_close():
    search, per_tick = replay(Strategy.OFFLINE)
    assert all(not toks for t, toks in per_tick[:-1])
    assert per_tick[-1] == (80, [0, 1, 0, 1])
    assert {e.strategy for e in search.commits.entries} == {Strategy.OFFLINE}
    assert {e.stream_time_ms for e in search.commits.entries} == {3200.0}


def test_infinite_delta_behaves_offline():
    for strategy in (Strategy.IMMORTAL, Strategy.FIRST_RANKED, Strategy.COMBINED):
        search, per_tick = replay(strategy)
        assert all(not toks for t, toks in per_tick[:-1])
        assert search.commits.committed_prefix == [0, 1, 0, 1]


def test_committed_prefix_only_grows():
    for strategy in (Strategy.IMMORTAL, Strategy.COMBINED):
        search, per_tick = replay(strategy, delta_immortal=10, delta_first_ranked=20)
        flat = list(itertools.chain.from_iterable(toks for _, toks in per_tick))
        assert flat == [0, 1, 0, 1]
        times = [e.stream_time_ms for e in search.commits.entries]
        assert times == sorted(times)


def test_tick_errors():
    scorer = ScriptedScorer((0,), (1,), eos=2)
    search = StreamingSearch(cfg=SearchConfig(strategy=Strategy.FIRST_RANKED, delta_first_ranked=1), eos_id=2)
    scorer.frontier = 10
    search.tick(scorer, 10, 400.0, closed=False)
    with pytest.raises(InputError):
        search.tick(scorer, 9, 360.0, closed=False)
    search.tick(scorer, 10, 400.0, closed=True)
    with pytest.raises(InputError):
        search.tick(scorer, 10, 400.0, closed=True)


def test_prefix_cache_prune(toy_model):
    cache = PrefixStateCache(toy_model.decoder, toy_model.config.bos_id)
    cache.get((1, 2, 3))
    cache.get((1, 4))
    assert len(cache) == 5
    cache.prune((1, 2))
    assert len(cache) == 2
    assert cache.get((1, 2, 3)).step == 4


def test_offline_decode_finds_reference(toy_model, small_corpus):
    cfg = SearchConfig(beam_size=4)
    for utt in small_corpus[:3]:
        best = decode_offline(toy_model, utt.features, cfg)
        assert list(best.tokens) == utt.reference
        assert best.score == pytest.approx(rescore(toy_model, utt.features, best.tokens), abs=1e-9)


def test_first_ranked_skips_a_token_whose_cover_did_not_move():
    stalled = Hypothesis(tokens=(13, 13, 21), score=0.0, covers=(5, 5, 9))
    assert first_ranked_commit(stalled, t=40, delta=10) == 1
    backwards = Hypothesis(tokens=(1, 2), score=0.0, covers=(8, 6))
    assert first_ranked_commit(backwards, t=40, delta=10) == 1
    assert first_ranked_commit(stalled, t=40, delta=10, committed=1) == 1


@pytest.mark.parametrize("utt_index", [0, 1, 2, 3])
def test_combined_commits_at_least_each_rule_per_tick(toy_model, small_corpus, utt_index):
    utt = small_corpus[utt_index]
    cfg = SearchConfig(beam_size=8, strategy=Strategy.COMBINED, delta_immortal=20, delta_first_ranked=70)
    dec = StreamDecoder(toy_model, cfg)
    n_frames = utt.features.num_frames
    for k in tick_frames(n_frames, 250.0, utt.features.frame_period_ms):
        before = len(dec.search.committed)
        closed = k == n_frames
        res = dec.feed(utt.features.head(k), stream_closed=closed)
        if closed or not res.hypotheses[0].tokens:
            continue
        k_comb, _ = combined_commit(res.hypotheses, res.frontier, cfg, before)
        assert k_comb >= immortal_prefix_commit(res.hypotheses, before)
        assert k_comb >= first_ranked_commit(best_of(res.hypotheses), res.frontier, 70, before)
        assert len(dec.search.committed) == k_comb
