# Synthetic corpus, toy model and stream simulation
from .corpus import generate_corpus, read_corpus, write_corpus
from .stream import StreamError, StreamOutcome, run_stream
from .sweep import EncoderSweepResult, SweepResult, run_encoder_sweep, run_sweep
from .toy_model import build_toy_model, train_toy_model, training_examples

__all__ = [
    "generate_corpus",
    "read_corpus",
    "write_corpus",
    "StreamError",
    "StreamOutcome",
    "run_stream",
    "EncoderSweepResult",
    "SweepResult",
    "run_encoder_sweep",
    "run_sweep",
    "build_toy_model",
    "train_toy_model",
    "training_examples",
]
