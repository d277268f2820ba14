from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .encoders import EncoderStates
from .kernels import Matrix, RecurrentCellParams, ShapeError, Vector, log_softmax, lstm_cell_step, softmax
from .models.common import InputError
from .models.config import ConfigError


@dataclass(frozen=True)
class DecoderWeights:
    embedding: Matrix          # (vocab, embedding_dim)
    layers: Tuple[RecurrentCellParams, ...]
    query: Matrix              # (d_model, hidden): embedding output -> attention query
    positions: Matrix          # (max_positions, d_model): positional query table
    emb_proj: Matrix           # (d_model, hidden): embedding output -> context width
    out_w: Matrix              # (vocab, d_model)
    out_b: Vector              # (vocab,)

    @property
    def vocab(self) -> int:
        return self.embedding.shape[0]

    @property
    def hidden(self) -> int:
        return self.layers[-1].hidden_size

    @property
    def d_model(self) -> int:
        return self.positions.shape[1]

    def check(self) -> None:
        in_size = self.embedding.shape[1]
        for i, cell in enumerate(self.layers):
            if cell.input_size != in_size:
                raise ConfigError(f"decoder layer {i} expects {cell.input_size} inputs, gets {in_size}")
            in_size = cell.hidden_size
        d, h = self.d_model, self.hidden
        for name, m, shape in (
            ("query", self.query, (d, h)),
            ("emb_proj", self.emb_proj, (d, h)),
            ("out_w", self.out_w, (self.vocab, d)),
        ):
            if m.shape != shape:
                raise ConfigError(f"decoder {name} is {m.shape}, expected {shape}")
        if self.out_b.shape != (self.vocab,):
            raise ConfigError(f"decoder out_b is {self.out_b.shape}, expected ({self.vocab},)")


@dataclass(frozen=True)
class DecoderState:
    h: Tuple[Vector, ...]
    c: Tuple[Vector, ...]
    last_token: int
    step: int


@dataclass(frozen=True)
class StepOutput:
    log_probs: Vector
    attention: Vector
    attention_logits: Vector
    context: Vector
    query: Vector
    new_state: DecoderState


def initial_state(weights: DecoderWeights) -> DecoderState:
    zeros = tuple(np.zeros(cell.hidden_size) for cell in weights.layers)
    return DecoderState(h=zeros, c=zeros, last_token=-1, step=0)


def _keys(enc: Union[EncoderStates, Matrix]) -> Matrix:
    return enc.states if isinstance(enc, EncoderStates) else enc


def attention_logits(query: Vector, enc: Union[EncoderStates, Matrix],
                     mask: Optional[np.ndarray] = None) -> Vector:
    """Scaled dot products query . key / sqrt(d); masked-out frames get -inf."""
    keys = _keys(enc)
    if keys.ndim != 2 or keys.shape[1] != query.shape[0]:
        raise ShapeError(f"query of size {query.shape} against keys {keys.shape}")
    logits = keys @ query / math.sqrt(query.shape[0])
    if mask is not None:
        if mask.shape != (keys.shape[0],):
            raise ShapeError(f"mask {mask.shape} does not cover {keys.shape[0]} frames")
        logits = np.where(mask, logits, -np.inf)
    return logits


def advance(weights: DecoderWeights, state: DecoderState, token: int) -> DecoderState:
    """Feed `token` through the embedding recurrences."""
    if not 0 <= token < weights.vocab:
        raise InputError(f"token {token} outside vocabulary of {weights.vocab}")
    x = weights.embedding[token]
    hs, cs = [], []
    for cell, h, c in zip(weights.layers, state.h, state.c):
        h, c = lstm_cell_step(cell, x, h, c)
        hs.append(h)
        cs.append(c)
        x = h
    return DecoderState(h=tuple(hs), c=tuple(cs), last_token=token, step=state.step + 1)


def attend(weights: DecoderWeights, state: DecoderState, enc: Union[EncoderStates, Matrix],
           mask: Optional[np.ndarray] = None) -> StepOutput:
    """Attention and output distribution for the next token after `state`."""
    keys = _keys(enc)
    if keys.shape[0] == 0:
        raise InputError("no encoder frames to attend to")
    if keys.shape[1] != weights.d_model:
        raise ConfigError(f"encoder width {keys.shape[1]} != decoder width {weights.d_model}")
    emb = state.h[-1]
    pos = weights.positions[min(max(state.step - 1, 0), weights.positions.shape[0] - 1)]
    query = pos + weights.query @ emb
    logits = attention_logits(query, keys, mask)
    attn = softmax(logits)
    ctx = attn @ keys
    z = weights.out_w @ (ctx + weights.emb_proj @ emb) + weights.out_b
    return StepOutput(
        log_probs=log_softmax(z),
        attention=attn,
        attention_logits=logits,
        context=ctx,
        query=query,
        new_state=state,
    )


def decode_step(weights: DecoderWeights, state: DecoderState, token: int,
                enc: Union[EncoderStates, Matrix], mask: Optional[np.ndarray] = None) -> StepOutput:
    return attend(weights, advance(weights, state, token), enc, mask)


def teacher_force(weights: DecoderWeights, enc: Union[EncoderStates, Matrix],
                  labels: Sequence[int], bos: int) -> List[StepOutput]:
    """One StepOutput per label: outputs[i] scores labels[i] given bos + labels[:i]."""
    outputs: List[StepOutput] = []
    state = initial_state(weights)
    token = bos
    for y in labels:
        out = decode_step(weights, state, token, enc)
        outputs.append(out)
        state = out.new_state
        token = y
    return outputs
