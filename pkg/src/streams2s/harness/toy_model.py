"""A hand-built attention model that reads the synthetic corpus.

The encoder averages each stack of input frames and adds a small random recurrent term.
The decoder's positional query for step p matches the exact position one-hot of token p,
leaks onto token p+1 through a lookahead term, and uses the coarse position code to stay
near p when the exact code is absent. The output layer scores the attended signature.
The lookahead leak is what the constraint loss trains away.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..decoder import DecoderWeights
from ..encoders import EncoderLayer, EncoderWeights, StreamingEncoder
from ..kernels import RecurrentCellParams
from ..model import ModelWeights
from ..models.config import POSITION_DIMS, ConstraintLossConfig, ModelConfig
from ..models.features import SyntheticUtterance
from ..objectives import (
    AlignmentRegion,
    TrainingExample,
    future_attention_mass,
    train_query_table,
)
from .corpus import COARSE_OMEGA, signature_dims, token_signatures

log = logging.getLogger(__name__)

EXACT_GAIN = 16.0
LOOKAHEAD_GAIN = 14.0
COARSE_GAIN = 48.0
OUTPUT_GAIN = 30.0
BOS_BIAS = -50.0
CELL_SCALE = 0.1
ENCODER_OUT_GAIN = 0.005
DECODER_SIDE_GAIN = 0.01


def _cell(rng: np.random.Generator, input_size: int, hidden: int) -> RecurrentCellParams:
    return RecurrentCellParams(
        w_input=CELL_SCALE * rng.standard_normal((4 * hidden, input_size)),
        w_recurrent=CELL_SCALE * rng.standard_normal((4 * hidden, hidden)),
        bias=CELL_SCALE * rng.standard_normal(4 * hidden),
    )


def positional_queries(config: ModelConfig, lookahead: float = LOOKAHEAD_GAIN) -> np.ndarray:
    d = config.d_model
    base = config.signature_dims
    table = np.zeros((config.max_positions, d))
    for p in range(config.max_positions):
        table[p, base + p % POSITION_DIMS] += EXACT_GAIN
        table[p, base + (p + 1) % POSITION_DIMS] += lookahead
        table[p, base + POSITION_DIMS] = COARSE_GAIN * math.cos(COARSE_OMEGA * p)
        table[p, base + POSITION_DIMS + 1] = COARSE_GAIN * math.sin(COARSE_OMEGA * p)
    # attention divides by sqrt(d)
    return table * math.sqrt(d)


def build_toy_model(seed: int = 0, config: Optional[ModelConfig] = None,
                    lookahead: float = LOOKAHEAD_GAIN) -> ModelWeights:
    config = config or ModelConfig()
    enc_cfg = config.encoder
    d = config.d_model
    rng = np.random.default_rng(seed)

    stacked = config.feature_dim * enc_cfg.downsample
    skip = np.hstack([np.eye(d) / enc_cfg.downsample] * enc_cfg.downsample)
    layers = []
    in_size = stacked
    for _ in range(enc_cfg.layers):
        fwd = _cell(rng, in_size, enc_cfg.hidden)
        bwd = _cell(rng, in_size, enc_cfg.hidden) if enc_cfg.directions == 2 else None
        layers.append(EncoderLayer(forward=fwd, backward=bwd))
        in_size = enc_cfg.output_hidden
    encoder = EncoderWeights(
        skip=skip,
        layers=tuple(layers),
        out=ENCODER_OUT_GAIN * rng.standard_normal((d, enc_cfg.output_hidden)),
    )

    vocab = config.output_size
    sigs = token_signatures(config.vocab_size + 1, signature_dims(config.feature_dim),
                            config.signature_seed)
    out_w = np.zeros((vocab, d))
    out_w[: config.vocab_size, : config.signature_dims] = OUTPUT_GAIN * sigs[: config.vocab_size]
    out_w[config.eos_id, : config.signature_dims] = OUTPUT_GAIN * sigs[config.vocab_size]
    out_b = np.zeros(vocab)
    out_b[config.bos_id] = BOS_BIAS

    dec_layers = []
    in_size = config.embedding_dim
    for _ in range(config.decoder_layers):
        dec_layers.append(_cell(rng, in_size, config.decoder_hidden))
        in_size = config.decoder_hidden
    h = config.decoder_hidden
    decoder = DecoderWeights(
        embedding=rng.standard_normal((vocab, config.embedding_dim)),
        layers=tuple(dec_layers),
        query=DECODER_SIDE_GAIN * rng.standard_normal((d, h)),
        positions=positional_queries(config, lookahead),
        emb_proj=DECODER_SIDE_GAIN * rng.standard_normal((d, h)),
        out_w=out_w,
        out_b=out_b,
    )
    model = ModelWeights(config=config, encoder=encoder, decoder=decoder)
    model.check()
    return model


def training_examples(model: ModelWeights, corpus: Sequence[SyntheticUtterance]) -> List[TrainingExample]:
    """Encoded utterances, labels with end-of-sentence appended and one constraint region per
    label: everything after the token's aligned end. End-of-sentence gets an empty region."""
    mc = model.config
    enc_ms = mc.encoder_frame_ms
    out = []
    for utt in corpus:
        enc = StreamingEncoder(mc.encoder, model.encoder, mc.feature_dim).encode(utt.features, True)
        regions = [
            AlignmentRegion(token_index=i, region_start=max(math.ceil(end / enc_ms) - 1, 0))
            for i, (_, end) in enumerate(utt.alignment)
        ]
        regions.append(AlignmentRegion(token_index=len(regions), region_start=enc.num_frames - 1))
        out.append(TrainingExample(
            enc=enc,
            labels=tuple(utt.reference) + (mc.eos_id,),
            regions=tuple(regions),
        ))
    return out


@dataclass(frozen=True)
class TrainingReport:
    losses: Tuple[float, ...]
    mass_before: float
    mass_after: float


def train_toy_model(
    model: ModelWeights,
    corpus: Sequence[SyntheticUtterance],
    alpha: float = 0.05,
    steps: int = 60,
    learning_rate: float = 200.0,
) -> Tuple[ModelWeights, TrainingReport]:
    """Trains the positional queries on the joint loss with the encoder frozen."""
    examples = training_examples(model, corpus)
    bos = model.config.bos_id
    before = future_attention_mass(model.decoder, examples, bos)
    decoder, losses = train_query_table(
        model.decoder, examples, bos, ConstraintLossConfig(alpha=alpha),
        steps=steps, learning_rate=learning_rate,
    )
    after = future_attention_mass(decoder, examples, bos)
    log.info("constraint training (alpha=%g, %d steps): future attention mass %.4f -> %.4f",
             alpha, steps, before, after)
    return replace(model, decoder=decoder), TrainingReport(tuple(losses), before, after)
