from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Tuple

from .binary.reader import ContainerError
from .harness.checks import gradient_check, oracle_check
from .harness.corpus import generate_corpus, read_corpus, write_corpus
from .harness.stream import StreamError, run_stream
from .harness.sweep import run_encoder_sweep, run_sweep
from .harness.toy_model import build_toy_model, train_toy_model
from .kernels import ShapeError
from .metrics import ideal_latency
from .model import ModelWeights
from .models.common import BackwardInit, EncoderPolicy, InputError, Strategy, parse_delta
from .models.config import (
    ConfigError,
    CorpusConfig,
    EncoderConfig,
    ModelConfig,
    RunConfig,
    SearchConfig,
    SweepSpec,
)
from .search import SearchError
from .version import __version__

log = logging.getLogger("streams2s")


def _csv(text: str) -> List[str]:
    return [t for t in text.split(",") if t.strip()]


def _pairs(text: str) -> List[Tuple[float, float]]:
    out = []
    for part in _csv(text):
        imm, _, fr = part.partition("-")
        out.append((parse_delta(imm), parse_delta(fr)))
    return out


def _encoder_config(args) -> EncoderConfig:
    return EncoderConfig(
        policy=EncoderPolicy(args.policy),
        layers=args.layers,
        hidden=args.hidden,
        chunk_size=args.chunk_size,
        backward_init=BackwardInit(args.backward_init),
    )


def cmd_gen_corpus(args) -> int:
    cfg = CorpusConfig(
        seed=args.seed,
        count=args.count,
        min_duration_ms=args.min_ms,
        max_duration_ms=args.max_ms,
        vocab_size=args.vocab,
    )
    corpus = generate_corpus(cfg)
    manifest = write_corpus(corpus, args.output)
    print(f"utterances={len(corpus)}, manifest={manifest}")
    return 0


def cmd_build_model(args) -> int:
    config = ModelConfig(vocab_size=args.vocab, encoder=_encoder_config(args))
    model = build_toy_model(args.seed, config)
    if args.train_alpha is not None:
        if not args.corpus:
            raise ConfigError("--train-alpha needs --corpus")
        model, report = train_toy_model(model, read_corpus(args.corpus), alpha=args.train_alpha,
                                        steps=args.steps)
        print(f"future attention mass {report.mass_before:.4f} -> {report.mass_after:.4f}")
    digest = model.save(args.output)
    print(f"model={args.output}, sha256={digest}")
    return 0


def _search_config(args) -> SearchConfig:
    return SearchConfig(
        beam_size=args.beam,
        theta=args.theta,
        delta_immortal=parse_delta(args.delta_immortal),
        delta_first_ranked=parse_delta(args.delta_first_ranked),
        strategy=Strategy(args.strategy),
        max_tokens=args.max_tokens,
    )


def cmd_decode(args) -> int:
    model = ModelWeights.load(args.model)
    corpus = {u.utt_id: u for u in read_corpus(args.corpus)}
    if args.utt not in corpus:
        raise InputError(f"no utterance {args.utt!r} in {args.corpus}")
    utt = corpus[args.utt]
    cfg = RunConfig(encoder=model.config.encoder, search=_search_config(args), tick_ms=args.tick_ms)
    out = run_stream(utt, model, cfg)
    sys.stdout.write(out.commits.to_text())
    print(f"transcript: {' '.join(map(str, out.transcript))}")
    print(f"reference:  {' '.join(map(str, utt.reference))}")
    ideal = ideal_latency(utt.end_times_s(), utt.duration_ms / 1000.0)
    print(f"wer={out.row.wer:.4f} latency={out.row.latency:.4f} ideal={ideal:.4f}")
    if args.plot:
        from .viz import plot_attention
        plot_attention(model, utt, out.transcript, args.plot)
    return 1 if out.violations else 0


def cmd_sweep(args) -> int:
    model = ModelWeights.load(args.model)
    corpus = read_corpus(args.corpus)
    spec = SweepSpec.grid(
        [Strategy(s) for s in _csv(args.strategies)],
        [int(b) for b in _csv(args.beams)],
        [parse_delta(d) for d in _csv(args.deltas)],
        pairs=_pairs(args.pairs),
        theta=args.theta,
        max_tokens=args.max_tokens,
        tick_ms=args.tick_ms,
        workers=args.workers,
    )
    result = run_sweep(corpus, model, spec, output_dir=args.output)
    sys.stdout.write(result.to_table())
    for v in result.violations:
        print(f"violation: {v}", file=sys.stderr)
    return 1 if result.violations else 0


def cmd_encoder_sweep(args) -> int:
    corpus = read_corpus(args.corpus)
    base = ModelConfig(vocab_size=args.vocab)
    encoders = [
        EncoderConfig(policy=EncoderPolicy.BIDIRECTIONAL),
        EncoderConfig(policy=EncoderPolicy.CHUNKED, chunk_size=args.large_k),
        EncoderConfig(policy=EncoderPolicy.CHUNKED, chunk_size=args.small_k),
        EncoderConfig(policy=EncoderPolicy.UNIDIRECTIONAL),
    ]
    result = run_encoder_sweep(corpus, encoders, base, seed=args.seed, beam_size=args.beam)
    sys.stdout.write(result.to_table())
    ok, _ = result.ordering()
    return 0 if ok else 1


def cmd_grad_check(args) -> int:
    failures = gradient_check(args.seed, args.count)
    for f in failures:
        print(f, file=sys.stderr)
    print(f"grad-check: {args.count - len(failures)}/{args.count} passed")
    return 1 if failures else 0


def cmd_oracle_check(args) -> int:
    failures = oracle_check(args.seed, args.count)
    for f in failures:
        print(f, file=sys.stderr)
    print(f"oracle-check: {args.count - len(failures)}/{args.count} passed")
    return 1 if failures else 0


def _add_encoder_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--policy", default="bidirectional", choices=[p.value for p in EncoderPolicy])
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--hidden", type=int, default=32)
    sp.add_argument("--chunk-size", type=int, default=80, help="Chunk size K in encoder frames")
    sp.add_argument("--backward-init", default="previous_chunk", choices=[b.value for b in BackwardInit])


def _add_search_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--theta", type=float, default=0.95, help="Covering-window attention mass")
    sp.add_argument("--max-tokens", type=int, default=64)
    sp.add_argument("--tick-ms", type=float, default=250.0, help="Stream chunk fed per tick")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="streams2s", description="Streaming attention decoder simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="INFO, or DEBUG when repeated")
    p.add_argument("--quiet", action="store_true", help="Only errors")
    sub = p.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("gen-corpus", help="write a synthetic corpus with alignments")
    sp.add_argument("output", help="Output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    sp.add_argument("--min-ms", type=float, default=2000.0)
    sp.add_argument("--max-ms", type=float, default=8000.0)
    sp.add_argument("--vocab", type=int, default=32)
    sp.set_defaults(func=cmd_gen_corpus)

    sp = sub.add_parser("build-model", help="write toy model weights")
    sp.add_argument("output", help="Weight file path")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--vocab", type=int, default=32)
    _add_encoder_args(sp)
    sp.add_argument("--train-alpha", type=float, default=None,
                    help="Train positional queries with this constraint weight")
    sp.add_argument("--corpus", help="Corpus directory for --train-alpha")
    sp.add_argument("--steps", type=int, default=60)
    sp.set_defaults(func=cmd_build_model)

    sp = sub.add_parser("decode", help="stream one utterance and print its commit log")
    sp.add_argument("model")
    sp.add_argument("corpus")
    sp.add_argument("utt", help="Utterance id")
    sp.add_argument("--strategy", default="offline", choices=[s.value for s in Strategy])
    sp.add_argument("--beam", type=int, default=8)
    sp.add_argument("--delta-immortal", default="inf")
    sp.add_argument("--delta-first-ranked", default="inf")
    _add_search_args(sp)
    sp.add_argument("--plot", help="Save an attention plot to this path")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("sweep", help="strategy/beam/delta sweep; writes report.csv and report.txt")
    sp.add_argument("model")
    sp.add_argument("corpus")
    sp.add_argument("--output", default="reports")
    sp.add_argument("--strategies", default="offline,immortal,first_ranked,combined")
    sp.add_argument("--beams", default="8")
    sp.add_argument("--deltas", default="10,30,50,70")
    sp.add_argument("--pairs", default="20-70,30-70,60-70",
                    help="Combined (immortal-first_ranked) delta pairs")
    sp.add_argument("--workers", type=int, default=1)
    _add_search_args(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("encoder-sweep", help="offline WER per encoder policy")
    sp.add_argument("corpus")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--vocab", type=int, default=32)
    sp.add_argument("--beam", type=int, default=8)
    sp.add_argument("--large-k", type=int, default=50)
    sp.add_argument("--small-k", type=int, default=10)
    sp.set_defaults(func=cmd_encoder_sweep)

    sp = sub.add_parser("grad-check", help="constraint-loss gradient vs finite differences")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=100)
    sp.set_defaults(func=cmd_grad_check)

    sp = sub.add_parser("oracle-check", help="beam search vs exhaustive enumeration")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=200)
    sp.set_defaults(func=cmd_oracle_check)

    return p


def main(argv: Optional[List[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(ns.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return ns.func(ns)
    except (ConfigError, InputError, ShapeError, ContainerError, SearchError, StreamError,
            ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
