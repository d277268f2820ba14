"""Beam search over encoder states, batch and streaming.

Hypotheses are ranked by (-score, tokens): higher score first, then the smaller token ids,
then the shorter sequence. While the stream is open end-of-sentence is masked and every
tick re-runs the search from the committed prefix over the current encoder states; only
the embedding recurrences are cached, keyed by token prefix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .decoder import DecoderState, DecoderWeights, advance, attend, initial_state
from .encoders import EncoderStates, StreamingEncoder
from .endpointing import EndpointState, covering_endpoint, observe_endpoint
from .kernels import Vector
from .model import ModelWeights
from .models.common import InputError, Strategy
from .models.config import SearchConfig
from .models.features import FeatureSequence
from .models.records import CommitEntry, CommitLog

log = logging.getLogger(__name__)

Tokens = Tuple[int, ...]


class SearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class Hypothesis:
    tokens: Tokens
    score: float
    state: Any = None
    # covering endpoint of every token as last observed; -1 when the scorer has no attention
    covers: Tuple[int, ...] = ()
    endpoints: Tuple[EndpointState, ...] = ()
    finished: bool = False

    def rank_key(self) -> Tuple[float, Tokens]:
        return (-self.score, self.tokens)


class Scorer(Protocol):
    def score(self, hyp: Hypothesis) -> Tuple[Vector, Optional[Vector]]:
        """Log-probabilities of the next token and the attention used to get them."""
        ...

    def advance(self, hyp: Hypothesis, token: int) -> Any:
        """Decoder state of `hyp` extended by `token`."""
        ...


def best_of(hyps: Iterable[Hypothesis]) -> Hypothesis:
    return min(hyps, key=Hypothesis.rank_key)


def beam_step(
    hyps: Sequence[Hypothesis],
    scorer: Scorer,
    beam_size: int,
    eos_id: Optional[int] = None,
    allow_eos: bool = True,
    masked: Sequence[int] = (),
    theta: float = 0.95,
    prefix: Sequence[int] = (),
) -> List[Hypothesis]:
    """Expands every active hypothesis by every token and keeps the best `beam_size`.

    Children ending in end-of-sentence come back with finished=True and without the
    end-of-sentence token.
    """
    active = [h for h in hyps if not h.finished]
    if not active:
        raise SearchError("beam_step needs at least one active hypothesis")
    prefix = tuple(prefix)
    candidates: List[Tuple[float, Tokens, int, Hypothesis, int]] = []
    for hyp in active:
        if hyp.tokens[: len(prefix)] != prefix:
            raise SearchError(f"hypothesis {hyp.tokens} does not extend prefix {prefix}")
        log_probs, attn = scorer.score(hyp)
        cover = covering_endpoint(attn, theta) if attn is not None else -1
        lp = np.array(log_probs, dtype=np.float64)
        for tok in masked:
            lp[tok] = -np.inf
        if eos_id is not None and not allow_eos:
            lp[eos_id] = -np.inf
        for tok in np.flatnonzero(np.isfinite(lp)):
            tok = int(tok)
            candidates.append((hyp.score + float(lp[tok]), hyp.tokens + (tok,), tok, hyp, cover))
    candidates.sort(key=lambda c: (-c[0], c[1]))

    out: List[Hypothesis] = []
    for score, tokens, tok, parent, cover in candidates[:beam_size]:
        if tok == eos_id:
            out.append(replace(parent, score=score, finished=True))
        else:
            out.append(Hypothesis(
                tokens=tokens,
                score=score,
                state=scorer.advance(parent, tok),
                covers=parent.covers + (cover,),
                endpoints=parent.endpoints + (EndpointState(),),
            ))
    return out


def beam_search(
    scorer: Scorer,
    root: Hypothesis,
    beam_size: int,
    max_tokens: int,
    eos_id: Optional[int] = None,
    masked: Sequence[int] = (),
    theta: float = 0.95,
) -> Hypothesis:
    """Runs to end-of-sentence (or `max_tokens`) from `root` and returns the best path.

    Stops once no hypothesis is active, beam_size hypotheses have finished, or the best
    finished score beats every active score. Without an end-of-sentence id the search
    runs exactly up to `max_tokens` tokens.
    """
    active = [root]
    finished: List[Hypothesis] = []
    while active and len(active[0].tokens) < max_tokens:
        children = beam_step(active, scorer, beam_size, eos_id, True, masked, theta, root.tokens)
        finished.extend(h for h in children if h.finished)
        active = [h for h in children if not h.finished]
        if len(finished) >= beam_size:
            break
        if finished and active and max(h.score for h in finished) > max(h.score for h in active):
            break
    return best_of(finished or active or [root])


# -- commit rules ------------------------------------------------------------


def _common_prefix_len(hyps: Sequence[Hypothesis]) -> int:
    n = min(len(h.tokens) for h in hyps)
    first = hyps[0].tokens
    for i in range(n):
        if any(h.tokens[i] != first[i] for h in hyps[1:]):
            return i
    return n


def immortal_prefix_commit(hyps: Sequence[Hypothesis], committed: int = 0) -> int:
    """Longest prefix shared by every hypothesis whose last token has a fixed endpoint.

    Returns the total committed token count, never less than `committed`.
    """
    if not hyps:
        raise SearchError("immortal_prefix_commit needs hypotheses")
    lead = best_of(hyps)
    for k in range(_common_prefix_len(hyps), committed, -1):
        if lead.endpoints[k - 1].fixed:
            return k
    return committed


def first_ranked_commit(best: Hypothesis, t: int, delta: float, committed: int = 0) -> int:
    """Commits while a token's cover trails the frontier by more than `delta` and lies
    strictly right of the previous token's cover."""
    k = committed
    while k < len(best.tokens):
        cover = best.covers[k]
        prev = best.covers[k - 1] if k > 0 else -1
        if not (0 <= cover < t - delta and cover > prev):
            break
        k += 1
    return k


def combined_commit(hyps: Sequence[Hypothesis], t: int, cfg: SearchConfig,
                    committed: int = 0) -> Tuple[int, Strategy]:
    """max of the two rules; the tag names whichever got further (immortal on a tie)."""
    k_imm = immortal_prefix_commit(hyps, committed)
    k_fr = first_ranked_commit(best_of(hyps), t, cfg.delta_first_ranked, committed)
    if k_fr > k_imm:
        return k_fr, Strategy.FIRST_RANKED
    return k_imm, Strategy.IMMORTAL


# -- streaming ---------------------------------------------------------------


@dataclass
class TickResult:
    committed: List[CommitEntry]
    best: Hypothesis
    hypotheses: List[Hypothesis]
    frontier: int
    closed: bool


@dataclass
class StreamingSearch:
    """Running search state of one stream. Single writer."""

    cfg: SearchConfig
    eos_id: Optional[int]
    masked: Tuple[int, ...] = ()
    commits: CommitLog = field(default_factory=CommitLog)
    _covers: Tuple[int, ...] = ()
    _endpoints: Tuple[EndpointState, ...] = ()
    _tracked: Dict[Tokens, EndpointState] = field(default_factory=dict)
    _frontier: int = 0
    _closed: bool = False
    final: Optional[Hypothesis] = None

    @property
    def committed(self) -> Tokens:
        return tuple(self.commits.committed_prefix)

    def _root(self, scorer_state: Any) -> Hypothesis:
        return Hypothesis(
            tokens=self.committed,
            score=0.0,
            state=scorer_state,
            covers=self._covers,
            endpoints=self._endpoints,
        )

    def _open_search(self, scorer: Scorer, root: Hypothesis) -> List[Hypothesis]:
        """Extends the beam until the best path's newest token stops moving right."""
        beam = [root]
        while len(beam[0].tokens) < self.cfg.max_tokens:
            beam = beam_step(beam, scorer, self.cfg.beam_size, self.eos_id, False,
                             self.masked, self.cfg.theta, root.tokens)
            lead = beam[0]
            prev = lead.covers[-2] if len(lead.covers) >= 2 else -1
            if lead.covers[-1] <= prev:
                break
        return beam

    def _track_endpoints(self, beam: List[Hypothesis], t: int) -> List[Hypothesis]:
        n = len(self.committed)
        tracked: Dict[Tokens, EndpointState] = {}
        out = []
        for hyp in beam:
            eps = list(hyp.endpoints)
            for j in range(n, len(hyp.tokens)):
                key = hyp.tokens[: j + 1]
                if key not in tracked:
                    prev = self._tracked.get(key, EndpointState())
                    tracked[key] = observe_endpoint(prev, hyp.covers[j], t, self.cfg.delta_immortal)
                eps[j] = tracked[key]
            out.append(replace(hyp, endpoints=tuple(eps)))
        self._tracked = tracked
        return out

    def tick(self, scorer: Scorer, frontier: int, stream_time_ms: float,
             closed: bool, root_state: Any = None) -> TickResult:
        """One search round over `frontier` encoder frames.

        `root_state` is the decoder state after the committed prefix.
        """
        if self._closed:
            raise InputError("stream already closed")
        if frontier < self._frontier:
            raise InputError(f"frontier moved backwards: {frontier} < {self._frontier}")
        self._frontier = frontier
        root = self._root(root_state)
        n = len(root.tokens)

        if closed:
            self._closed = True
            best = root
            if frontier > 0:
                best = beam_search(scorer, root, self.cfg.beam_size, self.cfg.max_tokens,
                                   self.eos_id, self.masked, self.cfg.theta)
            self.final = best
            new = self.commits.extend(best.tokens[n:], stream_time_ms, Strategy.OFFLINE)
            return TickResult(new, best, [best], frontier, True)

        if self.cfg.strategy is Strategy.OFFLINE or frontier == 0 or n >= self.cfg.max_tokens:
            return TickResult([], root, [root], frontier, False)

        beam = self._track_endpoints(self._open_search(scorer, root), frontier)
        best = beam[0]
        strategy = self.cfg.strategy
        if strategy is Strategy.IMMORTAL:
            k = immortal_prefix_commit(beam, n)
        elif strategy is Strategy.FIRST_RANKED:
            k = first_ranked_commit(best, frontier, self.cfg.delta_first_ranked, n)
        else:
            k, strategy = combined_commit(beam, frontier, self.cfg, n)

        new: List[CommitEntry] = []
        if k > n:
            new = self.commits.extend(best.tokens[n:k], stream_time_ms, strategy)
            self._covers = best.covers[:k]
            self._endpoints = best.endpoints[:k]
            log.debug("t=%d (%.0f ms): %s committed %s", frontier, stream_time_ms,
                      strategy.value, list(best.tokens[n:k]))
        return TickResult(new, best, beam, frontier, False)


class PrefixStateCache:
    """Decoder recurrent states keyed by the token prefix that follows begin-of-sentence."""

    def __init__(self, weights: DecoderWeights, bos_id: int):
        self.weights = weights
        self.bos_id = bos_id
        self._states: Dict[Tokens, DecoderState] = {}

    def __len__(self) -> int:
        return len(self._states)

    def get(self, prefix: Tokens) -> DecoderState:
        state = self._states.get(prefix)
        if state is not None:
            return state
        if prefix:
            state = advance(self.weights, self.get(prefix[:-1]), prefix[-1])
        else:
            state = advance(self.weights, initial_state(self.weights), self.bos_id)
        self._states[prefix] = state
        return state

    def prune(self, prefix: Tokens) -> None:
        """Drops every state that does not extend `prefix`."""
        n = len(prefix)
        self._states = {k: v for k, v in self._states.items() if k[:n] == prefix}


class AttentionScorer:
    """Scores hypotheses with the attention decoder against fixed encoder states."""

    def __init__(self, cache: PrefixStateCache, enc: EncoderStates):
        self.cache = cache
        self.enc = enc

    def score(self, hyp: Hypothesis) -> Tuple[Vector, Optional[Vector]]:
        out = attend(self.cache.weights, self.cache.get(hyp.tokens), self.enc)
        return out.log_probs, out.attention

    def advance(self, hyp: Hypothesis, token: int) -> DecoderState:
        return self.cache.get(hyp.tokens + (token,))


class StreamDecoder:
    """Encoder plus streaming search for one utterance."""

    def __init__(self, model: ModelWeights, cfg: SearchConfig):
        mc = model.config
        self.model = model
        self.cfg = cfg
        self.encoder = StreamingEncoder(mc.encoder, model.encoder, mc.feature_dim)
        self.cache = PrefixStateCache(model.decoder, mc.bos_id)
        self.search = StreamingSearch(cfg=cfg, eos_id=mc.eos_id, masked=(mc.bos_id,))

    @property
    def commit_log(self) -> CommitLog:
        return self.search.commits

    def feed(self, feats: FeatureSequence, stream_closed: bool = False) -> TickResult:
        enc = self.encoder.encode(feats, stream_closed)
        committed = self.search.committed
        self.cache.prune(committed)
        scorer = AttentionScorer(self.cache, enc)
        return self.search.tick(scorer, enc.num_frames, feats.duration_ms, stream_closed,
                                root_state=self.cache.get(committed))


def stream_decode(
    model: ModelWeights,
    feats: FeatureSequence,
    cfg: SearchConfig,
    state: Optional[StreamDecoder] = None,
    stream_closed: bool = False,
) -> Tuple[StreamDecoder, List[CommitEntry], Hypothesis]:
    """One tick of streaming decoding. Pass the returned decoder back on the next tick."""
    dec = state if state is not None else StreamDecoder(model, cfg)
    res = dec.feed(feats, stream_closed)
    return dec, res.committed, res.best


def decode_offline(model: ModelWeights, feats: FeatureSequence, cfg: SearchConfig) -> Hypothesis:
    """Batch beam search over the whole utterance."""
    mc = model.config
    enc = StreamingEncoder(mc.encoder, model.encoder, mc.feature_dim).encode(feats, True)
    cache = PrefixStateCache(model.decoder, mc.bos_id)
    root = Hypothesis(tokens=(), score=0.0, state=cache.get(()))
    if enc.num_frames == 0:
        return root
    return beam_search(AttentionScorer(cache, enc), root, cfg.beam_size, cfg.max_tokens,
                       mc.eos_id, (mc.bos_id,), cfg.theta)


def rescore(model: ModelWeights, feats: FeatureSequence, tokens: Sequence[int],
            with_eos: bool = True) -> float:
    """Sum of per-step log-probabilities of `tokens` under the full-utterance encoding."""
    mc = model.config
    enc = StreamingEncoder(mc.encoder, model.encoder, mc.feature_dim).encode(feats, True)
    cache = PrefixStateCache(model.decoder, mc.bos_id)
    labels = list(tokens) + ([mc.eos_id] if with_eos else [])
    total = 0.0
    for i, y in enumerate(labels):
        out = attend(model.decoder, cache.get(tuple(labels[:i])), enc)
        total += float(out.log_probs[y])
    return total
