from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .decoder import teacher_force
from .encoders import StreamingEncoder
from .model import ModelWeights
from .models.features import SyntheticUtterance


def attention_matrix(model: ModelWeights, utt: SyntheticUtterance, tokens: Sequence[int]) -> np.ndarray:
    """Teacher-forced attention of `tokens` (plus end-of-sentence) over the full utterance."""
    mc = model.config
    enc = StreamingEncoder(mc.encoder, model.encoder, mc.feature_dim).encode(utt.features, True)
    outs = teacher_force(model.decoder, enc, list(tokens) + [mc.eos_id], mc.bos_id)
    return np.vstack([o.attention for o in outs])


def plot_attention(model: ModelWeights, utt: SyntheticUtterance, tokens: Sequence[int],
                   path: Optional[str] = None):
    """Token-by-frame attention with the aligned token ends marked, for sanity-checking."""
    import matplotlib
    if path is not None:
        matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    attn = attention_matrix(model, utt, tokens)
    enc_ms = model.config.encoder_frame_ms
    fig, ax = plt.subplots()
    ax.imshow(attn, aspect="auto", origin="lower", cmap="Greys", interpolation="nearest")
    for i, (_, end) in enumerate(utt.alignment):
        ax.plot([end / enc_ms - 0.5], [i], "r|", markersize=10)
    ax.set_xlabel("Encoder frame")
    ax.set_ylabel("Output token")
    ax.set_title(f"{utt.utt_id} attention")
    if path is not None:
        fig.savefig(path)
        plt.close(fig)
    else:
        plt.show()
    return attn
