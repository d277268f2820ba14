"""Attention constraint loss, its gradient, and a small training loop for the decoder's
positional queries.

The constraint region of a token is every encoder frame strictly after the last frame of
the word it belongs to: frames x with region_start < x.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

import numpy as np

from .decoder import DecoderWeights, teacher_force
from .encoders import EncoderStates
from .kernels import Vector, softmax
from .models.common import InputError
from .models.config import ConstraintLossConfig

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlignmentRegion:
    token_index: int
    region_start: int

    def __post_init__(self) -> None:
        if self.region_start < 0:
            raise InputError(f"region_start must be >= 0, got {self.region_start}")


def _check_counts(n_tokens: int, regions: Sequence[AlignmentRegion]) -> None:
    if n_tokens != len(regions):
        raise InputError(f"{n_tokens} tokens but {len(regions)} regions")


def _region_mask(size: int, region: AlignmentRegion) -> np.ndarray:
    return np.arange(size) > region.region_start


def constraint_loss(
    attn: Sequence[Vector],
    regions: Sequence[AlignmentRegion],
    cfg: ConstraintLossConfig,
) -> float:
    _check_counts(len(attn), regions)
    total = 0.0
    for a, region in zip(attn, regions):
        a = np.asarray(a, dtype=np.float64)
        total += float(np.sum(a[_region_mask(a.size, region)]))
    return cfg.alpha * total


def constraint_loss_grad_logits(
    logits: Sequence[Vector],
    regions: Sequence[AlignmentRegion],
    cfg: ConstraintLossConfig,
) -> List[Vector]:
    """d/d(logits) of constraint_loss(softmax(logits)).

    With a = softmax(l) and m = sum of a over the region R: dm/dl_x = a_x (1[x in R] - m).
    """
    _check_counts(len(logits), regions)
    grads: List[Vector] = []
    for lg, region in zip(logits, regions):
        a = softmax(np.asarray(lg, dtype=np.float64))
        inside = _region_mask(a.size, region)
        m = float(np.sum(a[inside]))
        grads.append(cfg.alpha * a * (inside.astype(np.float64) - m))
    return grads


def cross_entropy(log_probs: Sequence[Vector], labels: Sequence[int]) -> float:
    if len(log_probs) != len(labels):
        raise InputError(f"{len(log_probs)} score vectors but {len(labels)} labels")
    return -sum(float(lp[y]) for lp, y in zip(log_probs, labels))


def joint_loss(
    log_probs: Sequence[Vector],
    labels: Sequence[int],
    attn_logits: Sequence[Vector],
    regions: Sequence[AlignmentRegion],
    cfg: ConstraintLossConfig,
) -> float:
    if len(attn_logits) != len(labels):
        raise InputError(f"{len(attn_logits)} attention rows but {len(labels)} labels")
    attn = [softmax(np.asarray(lg, dtype=np.float64)) for lg in attn_logits]
    return cross_entropy(log_probs, labels) + constraint_loss(attn, regions, cfg)


# -- toy training -----------------------------------------------------------


@dataclass(frozen=True)
class TrainingExample:
    """Frozen encoder output for one utterance, its labels (ending with end-of-sentence)
    and one region per label."""

    enc: EncoderStates
    labels: Tuple[int, ...]
    regions: Tuple[AlignmentRegion, ...]


def example_loss(weights: DecoderWeights, ex: TrainingExample, bos: int,
                 cfg: ConstraintLossConfig) -> float:
    outs = teacher_force(weights, ex.enc, ex.labels, bos)
    return joint_loss(
        [o.log_probs for o in outs], ex.labels, [o.attention_logits for o in outs], ex.regions, cfg
    )


def query_table_gradient(
    weights: DecoderWeights,
    ex: TrainingExample,
    bos: int,
    cfg: ConstraintLossConfig,
) -> Tuple[np.ndarray, float]:
    """Gradient of the joint loss of one example w.r.t. the positional query table.

    Only the query path is differentiated; the recurrent embedding state does not depend
    on the table.
    """
    _check_counts(len(ex.labels), ex.regions)
    keys = ex.enc.states
    scale = 1.0 / math.sqrt(weights.d_model)
    grad = np.zeros_like(weights.positions)
    outs = teacher_force(weights, keys, ex.labels, bos)
    c_grads = constraint_loss_grad_logits([o.attention_logits for o in outs], ex.regions, cfg)
    loss = 0.0
    for out, y, g_con, region in zip(outs, ex.labels, c_grads, ex.regions):
        p = np.exp(out.log_probs)
        loss -= float(out.log_probs[y])
        loss += cfg.alpha * float(np.sum(out.attention[_region_mask(out.attention.size, region)]))
        dz = p.copy()
        dz[y] -= 1.0
        d_ctx = weights.out_w.T @ dz
        g = keys @ d_ctx
        a = out.attention
        d_logits = a * (g - float(a @ g)) + g_con
        row = min(max(out.new_state.step - 1, 0), grad.shape[0] - 1)
        grad[row] += scale * (keys.T @ d_logits)
    return grad, loss


def train_query_table(
    weights: DecoderWeights,
    examples: Sequence[TrainingExample],
    bos: int,
    cfg: ConstraintLossConfig,
    steps: int = 60,
    learning_rate: float = 200.0,
    max_step_norm: float = 5.0,
) -> Tuple[DecoderWeights, List[float]]:
    """Gradient descent on the mean joint loss, positional queries only.

    Each table row is averaged over the examples that reach that position; every row
    update is clipped to `max_step_norm`.
    """
    if not examples:
        raise InputError("no training examples")
    counts = np.zeros(weights.positions.shape[0])
    for ex in examples:
        counts[: min(len(ex.labels), counts.size)] += 1
    counts = np.maximum(counts, 1.0)[:, None]
    losses: List[float] = []
    for step in range(steps):
        grad = np.zeros_like(weights.positions)
        loss = 0.0
        for ex in examples:
            g, l = query_table_gradient(weights, ex, bos, cfg)
            grad += g
            loss += l
        update = learning_rate * grad / counts
        norms = np.linalg.norm(update, axis=1, keepdims=True)
        update *= np.minimum(1.0, max_step_norm / np.maximum(norms, 1e-300))
        weights = replace(weights, positions=weights.positions - update)
        losses.append(loss / len(examples))
        log.debug("train step %d: mean joint loss %.6f", step, losses[-1])
    return weights, losses


def future_attention_mass(
    weights: DecoderWeights,
    examples: Sequence[TrainingExample],
    bos: int,
) -> float:
    """Mean attention mass inside the constraint regions, per label."""
    unit = ConstraintLossConfig(alpha=1.0)
    total, n = 0.0, 0
    for ex in examples:
        outs = teacher_force(weights, ex.enc, ex.labels, bos)
        total += constraint_loss([o.attention for o in outs], ex.regions, unit)
        n += len(ex.labels)
    return total / n if n else 0.0
