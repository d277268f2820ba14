import csv
import io

import pytest

from streams2s.harness.sweep import (
    EncoderSweepResult,
    EncoderSweepRow,
    is_nondecreasing,
    run_encoder_sweep,
    run_sweep,
)
from streams2s.metrics import SHIFT_LADDER_S
from streams2s.models.common import EncoderPolicy, InputError, Strategy
from streams2s.models.config import EncoderConfig, SweepSpec

DELTAS = [10.0, 30.0, 50.0, 70.0]


def test_report_files(tmp_path, toy_model, small_corpus):
    spec = SweepSpec.grid([Strategy.OFFLINE, Strategy.FIRST_RANKED], [4], [30.0])
    result = run_sweep(small_corpus[:3], toy_model, spec, output_dir=tmp_path)
    rows = list(csv.DictReader(io.StringIO((tmp_path / "report.csv").read_text())))
    assert list(rows[0]) == ["utt_id", "strategy", "beam", "delta", "wer", "latency"]
    assert len(rows) == 2 * (3 + 1)
    summary = [r for r in rows if r["utt_id"] == "__corpus__"]
    assert [(r["strategy"], r["delta"]) for r in summary] == [("offline", "-"), ("first_ranked", "30")]
    assert float(summary[0]["latency"]) == pytest.approx(1.0)
    assert float(summary[1]["latency"]) < 1.0
    table = (tmp_path / "report.txt").read_text()
    assert "instant recognizer" in table
    assert len(result.ladder) == len(SHIFT_LADDER_S)
    assert is_nondecreasing([lat for _, lat in result.ladder])
    assert result.ideal_latency < 1.0
    assert result.violations == []


def test_workers_do_not_change_results(toy_model, small_corpus):
    spec = SweepSpec.grid([Strategy.FIRST_RANKED], [4], [30.0])
    one = run_sweep(small_corpus[:4], toy_model, spec)
    many = run_sweep(small_corpus[:4], toy_model, spec.model_copy(update={"workers": 3}))
    assert one.to_csv() == many.to_csv()


def test_empty_corpus(toy_model):
    with pytest.raises(InputError):
        run_sweep([], toy_model, SweepSpec.grid([Strategy.OFFLINE], [4], []))


def test_first_ranked_delta_trend(toy_model, acceptance_corpus):
    spec = SweepSpec.grid([Strategy.OFFLINE, Strategy.FIRST_RANKED, Strategy.COMBINED], [8], DELTAS,
                          pairs=[(20.0, 70.0)])
    result = run_sweep(acceptance_corpus, toy_model, spec)
    assert result.violations == []
    by_label = {(r.strategy, r.delta): r for r in result.reports}
    offline = by_label[("offline", "-")]
    fr = [by_label[("first_ranked", f"{d:g}")] for d in DELTAS]

    assert offline.mean_latency == pytest.approx(1.0)
    assert is_nondecreasing([r.mean_latency for r in fr])
    assert fr[-1].mean_latency < 1.0
    assert all(r.mean_latency > result.ideal_latency for r in fr)
    # only the tightest delta may commit tokens the final search would not produce
    for r in fr[1:]:
        assert r.corpus_wer <= offline.corpus_wer + 0.005
    assert is_nondecreasing([-r.corpus_wer for r in fr])

    combined = by_label[("combined", "20-70")]
    assert combined.mean_latency <= fr[-1].mean_latency + 0.005
    assert combined.corpus_wer <= offline.corpus_wer + 0.01


def test_encoder_sweep_ordering_holds(acceptance_corpus):
    encoders = [
        EncoderConfig(policy=EncoderPolicy.BIDIRECTIONAL),
        EncoderConfig(policy=EncoderPolicy.CHUNKED, chunk_size=50),
        EncoderConfig(policy=EncoderPolicy.CHUNKED, chunk_size=10),
        EncoderConfig(policy=EncoderPolicy.UNIDIRECTIONAL),
    ]
    result = run_encoder_sweep(acceptance_corpus[:40], encoders, beam_size=8)
    assert [r.label for r in result.rows] == [
        "bidirectional",
        "chunked(K=50,previous_chunk)",
        "chunked(K=10,previous_chunk)",
        "unidirectional",
    ]
    wers = [r.wer for r in result.rows]
    assert max(wers) - min(wers) <= 0.05
    ok, lines = result.ordering()
    assert ok, lines
    assert len(lines) == 3
    table = result.to_table()
    assert table.count("(tie)") == len(result.ties)


def test_encoder_ordering():
    rows = [EncoderSweepRow("a", 0.1), EncoderSweepRow("b", 0.1), EncoderSweepRow("c", 0.2)]
    ok, lines = EncoderSweepResult(rows).ordering()
    assert ok and lines[0].endswith("(tie)") and "<" in lines[1]
    ok, lines = EncoderSweepResult(rows[::-1]).ordering()
    assert not ok and ">" in lines[0]
    assert EncoderSweepResult(rows).ties == [("a", "b")]
    assert "ordering VIOLATED" in EncoderSweepResult(rows[::-1]).to_table()
