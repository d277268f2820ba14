"""Encoder policies over stacked feature frames.

Every policy maps T_in input frames to T_enc = T_in // downsample encoder frames. Each
encoder frame is `skip @ x_t + out @ h_t`, where x_t stacks `downsample` consecutive input
frames and h_t is the top recurrent layer's output (forward, or forward ++ backward).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .kernels import Matrix, RecurrentCellParams, Vector, lstm_cell_step
from .models.common import BackwardInit, EncoderPolicy, InputError
from .models.config import ConfigError, EncoderConfig
from .models.features import FeatureSequence

log = logging.getLogger(__name__)

CellState = Tuple[Vector, Vector]


@dataclass(frozen=True)
class EncoderLayer:
    forward: RecurrentCellParams
    backward: Optional[RecurrentCellParams] = None


@dataclass(frozen=True)
class EncoderWeights:
    skip: Matrix
    layers: Tuple[EncoderLayer, ...]
    out: Matrix

    @property
    def d_model(self) -> int:
        return self.skip.shape[0]

    def check(self, cfg: EncoderConfig, feature_dim: int) -> None:
        stacked = feature_dim * cfg.downsample
        if self.skip.shape[1] != stacked:
            raise ConfigError(f"skip projection expects {self.skip.shape[1]} inputs, config gives {stacked}")
        if len(self.layers) != cfg.layers:
            raise ConfigError(f"{len(self.layers)} encoder layers, config says {cfg.layers}")
        in_size = stacked
        for i, layer in enumerate(self.layers):
            bidir = layer.backward is not None
            if bidir != (cfg.directions == 2):
                raise ConfigError(f"layer {i} direction count does not match policy {cfg.policy.value}")
            for cell in (layer.forward, layer.backward):
                if cell is None:
                    continue
                if cell.input_size != in_size or cell.hidden_size != cfg.hidden:
                    raise ConfigError(
                        f"layer {i} cell is {cell.input_size}->{cell.hidden_size}, "
                        f"expected {in_size}->{cfg.hidden}"
                    )
            in_size = cfg.output_hidden
        if self.out.shape != (self.d_model, cfg.output_hidden):
            raise ConfigError(f"output projection {self.out.shape} != ({self.d_model}, {cfg.output_hidden})")


@dataclass(frozen=True)
class EncoderStates:
    states: Matrix
    stable_upto: int
    total_input_frames: int

    @property
    def num_frames(self) -> int:
        return int(self.states.shape[0])


def stability_horizon(s: EncoderStates) -> int:
    return s.stable_upto


def _zeros(cfg: EncoderConfig) -> List[CellState]:
    return [(np.zeros(cfg.hidden), np.zeros(cfg.hidden)) for _ in range(cfg.layers)]


class StreamingEncoder:
    """Incremental encoder for one stream. Not thread-safe; one instance per stream."""

    def __init__(self, cfg: EncoderConfig, weights: EncoderWeights, feature_dim: int):
        weights.check(cfg, feature_dim)
        self.cfg = cfg
        self.weights = weights
        self.feature_dim = feature_dim
        self._rows: List[Vector] = []
        self._seen_frames = 0
        self._closed = False
        self._fwd: List[CellState] = _zeros(cfg)
        self._bwd: List[CellState] = _zeros(cfg)

    # -- helpers ----------------------------------------------------------

    def _stacked(self, frames: np.ndarray, t: int) -> Vector:
        ds = self.cfg.downsample
        return np.ascontiguousarray(frames[t * ds:(t + 1) * ds]).reshape(-1)

    def _project(self, x: Vector, top: Vector) -> Vector:
        return self.weights.skip @ x + self.weights.out @ top

    def _run_block(
        self,
        xs: Sequence[Vector],
        fwd_init: Sequence[CellState],
        bwd_init: Sequence[CellState],
    ) -> Tuple[List[Vector], List[CellState], List[CellState]]:
        """Bidirectional pass over one block. Returns rows, forward-final and
        backward-final (left edge) states per layer."""
        seq: List[Vector] = list(xs)
        fwd_final: List[CellState] = []
        bwd_final: List[CellState] = []
        for layer, f0, b0 in zip(self.weights.layers, fwd_init, bwd_init):
            assert layer.backward is not None
            h, c = f0
            fwd_out: List[Vector] = []
            for x in seq:
                h, c = lstm_cell_step(layer.forward, x, h, c)
                fwd_out.append(h)
            fwd_final.append((h, c))
            h, c = b0
            bwd_out: List[Vector] = [np.empty(0)] * len(seq)
            for t in range(len(seq) - 1, -1, -1):
                h, c = lstm_cell_step(layer.backward, seq[t], h, c)
                bwd_out[t] = h
            bwd_final.append((h, c))
            seq = [np.concatenate([f, b]) for f, b in zip(fwd_out, bwd_out)]
        rows = [self._project(x, top) for x, top in zip(xs, seq)]
        return rows, fwd_final, bwd_final

    # -- policies ---------------------------------------------------------

    def _encode_unidirectional(self, frames: np.ndarray, t_enc: int) -> None:
        for t in range(len(self._rows), t_enc):
            x = self._stacked(frames, t)
            inp = x
            for i, layer in enumerate(self.weights.layers):
                h, c = lstm_cell_step(layer.forward, inp, *self._fwd[i])
                self._fwd[i] = (h, c)
                inp = h
            self._rows.append(self._project(x, inp))

    def _encode_chunked(self, frames: np.ndarray, t_enc: int, closed: bool) -> List[Vector]:
        k = self.cfg.chunk_size
        constant = self.cfg.backward_init is BackwardInit.CONSTANT
        while len(self._rows) < t_enc and (len(self._rows) + k <= t_enc or closed):
            start = len(self._rows)
            end = min(start + k, t_enc)
            xs = [self._stacked(frames, t) for t in range(start, end)]
            bwd_init = _zeros(self.cfg) if constant else self._bwd
            rows, self._fwd, bwd_final = self._run_block(xs, self._fwd, bwd_init)
            self._bwd = bwd_final
            self._rows.extend(rows)
        if len(self._rows) == t_enc:
            return []
        # provisional rows for the open partial chunk; carried states stay untouched
        xs = [self._stacked(frames, t) for t in range(len(self._rows), t_enc)]
        bwd_init = _zeros(self.cfg) if constant else self._bwd
        rows, _, _ = self._run_block(xs, self._fwd, bwd_init)
        return rows

    def encode(self, feats: FeatureSequence, stream_closed: bool = True) -> EncoderStates:
        if feats.dim != self.feature_dim:
            raise ConfigError(f"features have {feats.dim} dims, encoder expects {self.feature_dim}")
        if feats.num_frames < self._seen_frames:
            raise InputError(f"stream shrank from {self._seen_frames} to {feats.num_frames} frames")
        if self._closed and feats.num_frames != self._seen_frames:
            raise InputError("stream already closed")
        self._seen_frames = feats.num_frames
        self._closed = self._closed or stream_closed
        frames = feats.frames
        t_enc = feats.num_frames // self.cfg.downsample
        policy = self.cfg.policy
        provisional: List[Vector] = []

        if policy is EncoderPolicy.UNIDIRECTIONAL:
            self._encode_unidirectional(frames, t_enc)
            stable = t_enc
        elif policy is EncoderPolicy.CHUNKED:
            provisional = self._encode_chunked(frames, t_enc, self._closed)
            stable = t_enc if self._closed else (t_enc // self.cfg.chunk_size) * self.cfg.chunk_size
        else:
            xs = [self._stacked(frames, t) for t in range(t_enc)]
            self._rows, _, _ = self._run_block(xs, _zeros(self.cfg), _zeros(self.cfg))
            stable = t_enc if self._closed else 0

        rows = self._rows + provisional
        states = np.vstack(rows) if rows else np.zeros((0, self.weights.d_model))
        log.debug("encoded %d frames -> %d states (stable %d, %s)",
                  feats.num_frames, t_enc, stable, policy.value)
        return EncoderStates(states=states, stable_upto=stable, total_input_frames=feats.num_frames)


def encode(
    cfg: EncoderConfig,
    weights: EncoderWeights,
    feats: FeatureSequence,
    stream_closed: bool = True,
) -> EncoderStates:
    """One-shot encoding of `feats` with a fresh encoder."""
    return StreamingEncoder(cfg, weights, feats.dim).encode(feats, stream_closed)
