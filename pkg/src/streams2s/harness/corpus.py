"""Synthetic utterances with known token alignments.

Every encoder frame of a token segment carries the token's signature, an exact position
one-hot (token index mod POSITION_DIMS) and a coarse position code [cos wi, sin wi].
Silence carries noise only. After the last token an end-of-sentence segment carries the
end-of-sentence signature at position n. Each encoder frame is `downsample` identical input
frames plus independent noise.
"""
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..binary.reader import read_feature_file
from ..binary.writer import write_feature_file
from ..models.common import InputError
from ..models.config import COARSE_DIMS, POSITION_DIMS, ConfigError, CorpusConfig
from ..models.features import FeatureSequence, SyntheticUtterance

log = logging.getLogger(__name__)

COARSE_OMEGA = math.pi / 64
SIGNATURE_CANDIDATES = 200
MANIFEST_NAME = "manifest.tsv"


def signature_dims(feature_dim: int) -> int:
    return feature_dim - POSITION_DIMS - COARSE_DIMS


def token_signatures(count: int, dims: int, seed: int = 0) -> np.ndarray:
    """`count` unit vectors in `dims` dimensions, the least mutually correlated of
    SIGNATURE_CANDIDATES seeded draws."""
    if count < 1 or dims < 1:
        raise ConfigError(f"need at least one signature of one dim, got {count}x{dims}")
    rng = np.random.default_rng(seed)
    best, best_corr = None, math.inf
    for _ in range(SIGNATURE_CANDIDATES):
        m = rng.standard_normal((count, dims))
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        gram = np.abs(m @ m.T)
        np.fill_diagonal(gram, 0.0)
        corr = float(gram.max()) if count > 1 else 0.0
        if corr < best_corr:
            best, best_corr = m, corr
    assert best is not None
    return best


def position_code(index: int, feature_dim: int) -> np.ndarray:
    """Position columns of a segment at token index `index` (signature columns zero)."""
    code = np.zeros(feature_dim)
    base = signature_dims(feature_dim)
    code[base + index % POSITION_DIMS] = 1.0
    code[base + POSITION_DIMS] = math.cos(COARSE_OMEGA * index)
    code[base + POSITION_DIMS + 1] = math.sin(COARSE_OMEGA * index)
    return code


def _segment_code(sig: np.ndarray, index: int, feature_dim: int) -> np.ndarray:
    code = position_code(index, feature_dim)
    code[: sig.size] = sig
    return code


def generate_utterance(cfg: CorpusConfig, rng: np.random.Generator, sigs: np.ndarray,
                       utt_id: str) -> SyntheticUtterance:
    enc_ms = cfg.encoder_frame_ms
    lo = math.ceil(cfg.min_duration_ms / enc_ms)
    hi = math.floor(cfg.max_duration_ms / enc_ms)
    total = int(rng.integers(lo, hi + 1))

    # (first encoder frame, length, code) per segment
    segments: List[Tuple[int, int, np.ndarray]] = []
    reference: List[int] = []
    cur = cfg.lead_frames
    while True:
        length = int(rng.integers(cfg.min_token_frames, cfg.max_token_frames + 1))
        pause = int(rng.integers(0, cfg.max_pause_frames + 1))
        if reference and cur + length + pause + cfg.eos_frames > total:
            break
        token = int(rng.integers(0, cfg.vocab_size))
        segments.append((cur, length, _segment_code(sigs[token], len(reference), cfg.feature_dim)))
        reference.append(token)
        cur += length + pause
    eos_code = _segment_code(sigs[cfg.vocab_size], len(reference), cfg.feature_dim)
    segments.append((cur, cfg.eos_frames, eos_code))
    total = max(total, cur + cfg.eos_frames)

    enc_frames = np.zeros((total, cfg.feature_dim))
    for start, length, code in segments:
        enc_frames[start:start + length] = code
    frames = np.repeat(enc_frames, cfg.downsample, axis=0)
    frames += cfg.noise * rng.standard_normal(frames.shape)

    alignment = [(start * enc_ms, (start + length) * enc_ms) for start, length, _ in segments[:-1]]
    return SyntheticUtterance(
        utt_id=utt_id,
        features=FeatureSequence(frames=frames, frame_period_ms=cfg.frame_period_ms),
        reference=reference,
        alignment=alignment,
    )


def generate_corpus(cfg: CorpusConfig) -> List[SyntheticUtterance]:
    """Deterministic in cfg (seed included)."""
    cfg.check()
    sigs = token_signatures(cfg.vocab_size + 1, signature_dims(cfg.feature_dim), cfg.signature_seed)
    rng = np.random.default_rng(cfg.seed)
    width = len(str(cfg.count - 1))
    return [generate_utterance(cfg, rng, sigs, f"utt{i:0{width}d}") for i in range(cfg.count)]


# -- files -------------------------------------------------------------------


def _format_alignment(alignment: Sequence[Tuple[float, float]]) -> str:
    return ";".join(f"{s:g}:{e:g}" for s, e in alignment)


def _parse_alignment(text: str) -> List[Tuple[float, float]]:
    out = []
    for part in filter(None, text.split(";")):
        start, _, end = part.partition(":")
        out.append((float(start), float(end)))
    return out


def write_corpus(corpus: Sequence[SyntheticUtterance], directory: Union[str, Path]) -> Path:
    """Feature files under `directory/feats/` plus a tab-separated manifest. Returns the
    manifest path."""
    root = Path(directory)
    (root / "feats").mkdir(parents=True, exist_ok=True)
    lines = []
    for utt in corpus:
        rel = Path("feats") / f"{utt.utt_id}.s2sf"
        (root / rel).write_bytes(write_feature_file(utt.features))
        lines.append("\t".join([
            utt.utt_id,
            rel.as_posix(),
            f"{utt.duration_ms:g}",
            " ".join(map(str, utt.reference)),
            _format_alignment(utt.alignment),
        ]))
    manifest = root / MANIFEST_NAME
    manifest.write_text("".join(l + "\n" for l in lines), encoding="utf-8")
    log.info("wrote %d utterances to %s", len(corpus), manifest)
    return manifest


def read_corpus(manifest: Union[str, Path]) -> List[SyntheticUtterance]:
    path = Path(manifest)
    if path.is_dir():
        path = path / MANIFEST_NAME
    corpus = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 5:
            raise InputError(f"{path}:{lineno}: expected 5 fields, got {len(fields)}")
        utt_id, feat_path, duration, ref, ali = fields
        feats = read_feature_file(path.parent / feat_path)
        if not math.isclose(feats.duration_ms, float(duration)):
            raise InputError(f"{path}:{lineno}: duration {duration} != feature duration {feats.duration_ms}")
        corpus.append(SyntheticUtterance(
            utt_id=utt_id,
            features=feats,
            reference=[int(t) for t in ref.split()],
            alignment=_parse_alignment(ali),
        ))
    return corpus
