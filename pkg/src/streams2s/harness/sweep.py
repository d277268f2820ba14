"""Sweeps over search settings and encoder policies, plus their report files."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from ..metrics import SHIFT_LADDER_S, corpus_wer, ideal_latency, mean, shift_ladder
from ..model import ModelWeights
from ..models.common import EncoderPolicy, InputError
from ..models.config import EncoderConfig, ModelConfig, RunConfig, SearchConfig, SweepSetting, SweepSpec
from ..models.features import SyntheticUtterance
from ..models.records import LatencyReport, LatencyRow
from ..search import decode_offline
from .stream import StreamOutcome, run_stream
from .toy_model import build_toy_model

log = logging.getLogger(__name__)


@dataclass
class SweepResult:
    reports: List[LatencyReport]
    ideal_latency: float
    ladder: List[Tuple[float, float]]
    outcomes: List[List[StreamOutcome]] = field(default_factory=list)

    @property
    def violations(self) -> List[str]:
        return [v for r in self.reports for v in r.violations]

    def rows(self) -> List[LatencyRow]:
        out: List[LatencyRow] = []
        for report in self.reports:
            out.extend(report.rows)
            out.append(report.summary_row())
        return out

    def to_csv(self) -> str:
        lines = [LatencyRow.CSV_HEADER] + [r.to_csv() for r in self.rows()]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = [f"{'strategy':<14}{'beam':>5}{'delta':>9}{'WER':>9}{'latency':>9}"]
        for r in self.reports:
            lines.append(f"{r.strategy:<14}{r.beam:>5}{r.delta:>9}"
                         f"{100 * r.corpus_wer:>8.1f}%{r.mean_latency:>9.3f}")
        lines.append("")
        lines.append(f"instant recognizer (forced alignment): latency {self.ideal_latency:.3f}")
        for d, lat in self.ladder:
            lines.append(f"  shifted by {d:g} s: latency {lat:.3f}")
        return "\n".join(lines) + "\n"

    def write(self, output_dir: Union[str, Path]) -> Tuple[Path, Path]:
        root = Path(output_dir)
        root.mkdir(parents=True, exist_ok=True)
        csv_path, table_path = root / "report.csv", root / "report.txt"
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        table_path.write_text(self.to_table(), encoding="utf-8")
        log.info("wrote %s and %s", csv_path, table_path)
        return csv_path, table_path


def corpus_ideal_latency(corpus: Sequence[SyntheticUtterance]) -> float:
    return mean([ideal_latency(u.end_times_s(), u.duration_ms / 1000.0) for u in corpus])


def run_setting(corpus: Sequence[SyntheticUtterance], model: ModelWeights, setting: SweepSetting,
                spec: SweepSpec) -> Tuple[LatencyReport, List[StreamOutcome]]:
    cfg = RunConfig(
        encoder=model.config.encoder,
        search=setting.search_config(spec.theta, spec.max_tokens),
        tick_ms=spec.tick_ms,
    )
    log.info("sweep setting %s", setting.label)
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            outcomes = list(pool.map(lambda u: run_stream(u, model, cfg), corpus))
    else:
        outcomes = [run_stream(u, model, cfg) for u in corpus]
    outcomes.sort(key=lambda o: o.utt_id)
    report = LatencyReport(
        strategy=cfg.search.strategy.value,
        beam=cfg.search.beam_size,
        delta=cfg.search.delta_label,
        rows=[o.row for o in outcomes],
        violations=[v for o in outcomes for v in o.violations],
    )
    log.info("  %s: WER %.4f, latency %.4f", setting.label, report.corpus_wer, report.mean_latency)
    return report, outcomes


def run_sweep(
    corpus: Sequence[SyntheticUtterance],
    model: ModelWeights,
    spec: SweepSpec,
    output_dir: Optional[Union[str, Path]] = None,
    keep_outcomes: bool = False,
) -> SweepResult:
    if not corpus:
        raise InputError("empty corpus")
    ideal = corpus_ideal_latency(corpus)
    reports, all_outcomes = [], []
    for setting in spec.settings:
        report, outcomes = run_setting(corpus, model, setting, spec)
        report = report.model_copy(update={"ideal_latency": ideal})
        reports.append(report)
        if keep_outcomes:
            all_outcomes.append(outcomes)
    ladder = shift_ladder([(u.end_times_s(), u.duration_ms / 1000.0) for u in corpus], SHIFT_LADDER_S)
    result = SweepResult(reports=reports, ideal_latency=ideal, ladder=ladder, outcomes=all_outcomes)
    if output_dir is not None:
        result.write(output_dir)
    return result


def is_nondecreasing(values: Sequence[float], tol: float = 1e-12) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]))


# -- encoder policies ---------------------------------------------------------


@dataclass(frozen=True)
class EncoderSweepRow:
    label: str
    wer: float


@dataclass
class EncoderSweepResult:
    rows: List[EncoderSweepRow]

    def ordering(self) -> Tuple[bool, List[str]]:
        """Whether WER is nondecreasing in listed order, plus one line per adjacent pair
        marking '<', '=' (tie) or '>' (out of order)."""
        ok = True
        lines = []
        for a, b in zip(self.rows, self.rows[1:]):
            if a.wer < b.wer:
                rel = "<"
            elif a.wer == b.wer:
                rel = "="
            else:
                rel, ok = ">", False
            suffix = "  (tie)" if rel == "=" else ""
            lines.append(f"{a.label} {a.wer:.4f} {rel} {b.label} {b.wer:.4f}{suffix}")
        return ok, lines

    @property
    def ties(self) -> List[Tuple[str, str]]:
        return [(a.label, b.label) for a, b in zip(self.rows, self.rows[1:]) if a.wer == b.wer]

    def to_table(self) -> str:
        lines = [f"{'encoder':<28}{'WER':>9}"]
        lines += [f"{r.label:<28}{100 * r.wer:>8.2f}%" for r in self.rows]
        ok, order = self.ordering()
        lines.append("")
        lines += order
        lines.append("ordering holds" if ok else "ordering VIOLATED")
        return "\n".join(lines) + "\n"


def encoder_label(cfg: EncoderConfig) -> str:
    if cfg.policy is EncoderPolicy.CHUNKED:
        return f"chunked(K={cfg.chunk_size},{cfg.backward_init.value})"
    return cfg.policy.value


def run_encoder_sweep(
    corpus: Sequence[SyntheticUtterance],
    encoders: Sequence[EncoderConfig],
    base: Optional[ModelConfig] = None,
    seed: int = 0,
    beam_size: int = 8,
) -> EncoderSweepResult:
    """Offline corpus WER of a freshly built toy model per encoder config, in the given order."""
    if not corpus:
        raise InputError("empty corpus")
    base = base or ModelConfig()
    search = SearchConfig(beam_size=beam_size)
    rows = []
    for enc in encoders:
        model = build_toy_model(seed, base.model_copy(update={"encoder": enc}))
        pairs = [(u.reference, decode_offline(model, u.features, search).tokens) for u in corpus]
        rows.append(EncoderSweepRow(encoder_label(enc), corpus_wer(pairs)))
        log.info("encoder %s: WER %.4f", rows[-1].label, rows[-1].wer)
    result = EncoderSweepResult(rows)
    for a, b in result.ties:
        log.info("encoder tie: %s and %s", a, b)
    return result
