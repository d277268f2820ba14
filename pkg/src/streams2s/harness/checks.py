"""Randomized self-checks behind `grad-check` and `oracle-check`."""
from __future__ import annotations

import itertools
import logging
from typing import Any, List, Optional, Tuple

import numpy as np

from ..kernels import Vector, finite_diff_grad, log_softmax, softmax
from ..models.config import ConstraintLossConfig
from ..objectives import AlignmentRegion, constraint_loss, constraint_loss_grad_logits
from ..search import Hypothesis, beam_search

log = logging.getLogger(__name__)

GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-8


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = float(np.linalg.norm(analytic - numeric))
    scale = float(np.linalg.norm(analytic) + np.linalg.norm(numeric))
    return diff / max(scale, GRAD_ATOL)


def random_constraint_instance(
    rng: np.random.Generator,
) -> Tuple[List[Vector], List[AlignmentRegion], ConstraintLossConfig]:
    frames = int(rng.integers(2, 13))
    tokens = int(rng.integers(1, 5))
    logits = [2.0 * rng.standard_normal(frames) for _ in range(tokens)]
    regions = [AlignmentRegion(i, int(rng.integers(0, frames))) for i in range(tokens)]
    return logits, regions, ConstraintLossConfig(alpha=float(rng.uniform(0.01, 1.0)))


def gradient_check(seed: int = 0, count: int = 100) -> List[str]:
    """Analytic constraint-loss gradient against central differences on random instances."""
    rng = np.random.default_rng(seed)
    failures = []
    for k in range(count):
        logits, regions, cfg = random_constraint_instance(rng)
        shape = (len(logits), logits[0].size)

        def f(flat: Vector) -> float:
            rows = flat.reshape(shape)
            return constraint_loss([softmax(r) for r in rows], regions, cfg)

        analytic = np.concatenate(constraint_loss_grad_logits(logits, regions, cfg))
        numeric = finite_diff_grad(f, np.concatenate(logits))
        err = relative_error(analytic, numeric)
        if err > GRAD_RTOL:
            failures.append(f"instance {k}: relative error {err:.3e}")
    log.info("gradient check: %d/%d instances within %g", count - len(failures), count, GRAD_RTOL)
    return failures


class TableScorer:
    """Next-token log-probabilities from a table indexed by (step, previous token)."""

    def __init__(self, table: np.ndarray):
        self.table = table

    def score(self, hyp: Hypothesis) -> Tuple[Vector, Optional[Vector]]:
        step = len(hyp.tokens)
        prev = hyp.tokens[-1] if hyp.tokens else 0
        return self.table[step, prev], None

    def advance(self, hyp: Hypothesis, token: int) -> Any:
        return None


def random_score_table(rng: np.random.Generator, vocab: int, length: int) -> np.ndarray:
    raw = rng.standard_normal((length, vocab, vocab))
    return np.stack([[log_softmax(row) for row in step] for step in raw])


def exhaustive_best(table: np.ndarray) -> Tuple[Tuple[int, ...], float]:
    length, vocab = table.shape[0], table.shape[2]
    best: Optional[Tuple[float, Tuple[int, ...]]] = None
    for tokens in itertools.product(range(vocab), repeat=length):
        score, prev = 0.0, 0
        for step, tok in enumerate(tokens):
            score += float(table[step, prev, tok])
            prev = tok
        key = (-score, tokens)
        if best is None or key < best:
            best = key
    assert best is not None
    return best[1], -best[0]


def oracle_check(seed: int = 0, count: int = 200, max_vocab: int = 4, max_len: int = 6) -> List[str]:
    """Beam search with beam_size = |V|^len against exhaustive enumeration."""
    rng = np.random.default_rng(seed)
    failures = []
    for k in range(count):
        vocab = int(rng.integers(1, max_vocab + 1))
        length = int(rng.integers(1, max_len + 1))
        table = random_score_table(rng, vocab, length)
        want, _ = exhaustive_best(table)
        got = beam_search(TableScorer(table), Hypothesis(tokens=(), score=0.0),
                          beam_size=vocab ** length, max_tokens=length)
        if got.tokens != want:
            failures.append(f"table {k} (V={vocab}, L={length}): beam {got.tokens} != exhaustive {want}")
    log.info("oracle check: %d/%d tables agree", count - len(failures), count)
    return failures
