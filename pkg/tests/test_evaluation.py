"""Metric formulas, verdict joining, average precision, and the sweep."""

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mapscreen.evaluation import (
    ConfusionCounts,
    EvaluationError,
    RankedPrediction,
    average_precision,
    build_report,
    confusion_from_verdicts,
    f1,
    lambda_sweep,
    precision,
    ranking_score,
    recall,
    render_sweep_table,
    write_report,
)
from mapscreen.matching import MatchPolicy, MatchResult
from mapscreen.pipeline import (
    LABEL_NEGATIVE,
    LABEL_POSITIVE,
    REASON_CONTAINS_LANDMARK,
    REASON_ERROR,
    REASON_EXCLUDES_LANDMARKS,
    REASON_NOT_VIETNAM_MAP,
    Verdict,
)


def test_precision_recall_formulas():
    counts = ConfusionCounts(tp=8, fp=2, fn=4, tn=6)
    assert precision(counts) == pytest.approx(0.8)
    assert recall(counts) == pytest.approx(8 / 12)


def test_degenerate_counts_flagged_not_raised():
    counts = ConfusionCounts(tp=0, fp=0, fn=0, tn=5)
    assert precision(counts) == 0.0
    assert recall(counts) == 0.0
    report = build_report(counts)
    assert report.f1 == 0.0
    assert report.degenerate == ("precision", "recall")
    assert "degenerate" in report.to_json()


def test_f1_examples():
    assert f1(1.0, 1.0) == 1.0
    assert f1(0.0, 0.0) == 0.0
    assert f1(0.5, 1.0) == pytest.approx(2 / 3)


@given(st.floats(0.0, 1.0))
def test_f1_of_equal_args_is_identity(x):
    assert f1(x, x) == pytest.approx(x)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_f1_bounded_by_min_and_max(p, r):
    value = f1(p, r)
    assert min(p, r) - 1e-12 <= value <= max(p, r) + 1e-12


@given(st.floats(0.001, 1.0), st.floats(0.001, 1.0))
def test_f1_scale_free(p, r):
    assert f1(100.0 * p, 100.0 * r) == pytest.approx(100.0 * f1(p, r))


def mkv(image_id, label, reason=None, score=0.9):
    if reason is None:
        reason = REASON_EXCLUDES_LANDMARKS if label == LABEL_POSITIVE else REASON_CONTAINS_LANDMARK
    return Verdict(image_id=image_id, label=label, reason=reason, classifier_score=score)


def test_confusion_all_correct():
    verdicts = [mkv("a", LABEL_POSITIVE), mkv("b", LABEL_NEGATIVE), mkv("c", LABEL_POSITIVE)]
    truths = {"a": "positive", "b": "negative", "c": "positive"}
    counts = confusion_from_verdicts(verdicts, truths)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (2, 0, 0, 1)


def test_confusion_all_inverted():
    verdicts = [mkv("a", LABEL_NEGATIVE), mkv("b", LABEL_POSITIVE)]
    truths = {"a": "positive", "b": "negative"}
    counts = confusion_from_verdicts(verdicts, truths)
    assert (counts.tp, counts.fp, counts.fn, counts.tn) == (0, 1, 1, 0)


def test_confusion_order_invariant():
    verdicts = [mkv(f"img-{i}", LABEL_POSITIVE if i % 3 else LABEL_NEGATIVE) for i in range(9)]
    truths = {f"img-{i}": "positive" if i % 2 else "negative" for i in range(9)}
    forward = confusion_from_verdicts(verdicts, truths)
    backward = confusion_from_verdicts(list(reversed(verdicts)), truths)
    assert forward == backward


def test_confusion_error_verdict_counts_negative():
    error = Verdict(image_id="a", label=LABEL_NEGATIVE, reason=REASON_ERROR, error_stage="decode", error_message="x")
    assert confusion_from_verdicts([error], {"a": "positive"}).fn == 1
    assert confusion_from_verdicts([error], {"a": "negative"}).tn == 1


def test_confusion_id_mismatch_names_ids():
    verdicts = [mkv("a", LABEL_POSITIVE), mkv("stray", LABEL_POSITIVE)]
    truths = {"a": "positive", "gone": "negative"}
    with pytest.raises(EvaluationError) as excinfo:
        confusion_from_verdicts(verdicts, truths)
    assert "gone" in str(excinfo.value) and "stray" in str(excinfo.value)


def rp(image_id, score, truth):
    return RankedPrediction(image_id=image_id, score=score, ground_truth=truth)


def test_average_precision_interleaved():
    predictions = [
        rp("a", 0.9, "positive"),
        rp("b", 0.8, "negative"),
        rp("c", 0.7, "positive"),
        rp("d", 0.6, "negative"),
    ]
    assert average_precision(predictions) == pytest.approx((1.0 + 2 / 3) / 2, abs=1e-9)


def test_average_precision_perfect_ranking_is_exactly_one():
    predictions = [rp("a", 0.9, "positive"), rp("b", 0.8, "positive"), rp("c", 0.1, "negative")]
    assert average_precision(predictions) == 1.0


def test_average_precision_single_positive_ranked_last():
    n = 5
    predictions = [rp(f"n{i}", 1.0 - i / 10, "negative") for i in range(n - 1)]
    predictions.append(rp("pos", 0.0, "positive"))
    assert average_precision(predictions) == pytest.approx(1 / n)


def test_average_precision_tie_broken_by_id():
    # same score: "a" sorts first, so the positive at "b" sits at rank 2
    tied = [rp("a", 0.5, "negative"), rp("b", 0.5, "positive")]
    assert average_precision(tied) == pytest.approx(0.5)
    flipped = [rp("b", 0.5, "negative"), rp("a", 0.5, "positive")]
    assert average_precision(flipped) == 1.0


def test_average_precision_no_positives_raises():
    with pytest.raises(EvaluationError):
        average_precision([rp("a", 0.9, "negative")])


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ranking_score_orders_positives_above_negatives(pos_score, neg_score):
    positive = mkv("p", LABEL_POSITIVE, score=pos_score)
    negative = mkv("n", LABEL_NEGATIVE, score=neg_score)
    error = Verdict(image_id="e", label=LABEL_NEGATIVE, reason=REASON_ERROR, error_stage="decode", error_message="x")
    assert ranking_score(positive) > ranking_score(negative) > ranking_score(error)


def evidence(*texts):
    return tuple(
        MatchResult(matched=False, term=None, distance=None, input_normalized=t) for t in texts
    )


def sweep_verdicts():
    return [
        # "trung sa" sits at distance 1 from "truong sa"
        Verdict(image_id="near", label=LABEL_POSITIVE, reason=REASON_EXCLUDES_LANDMARKS,
                evidence=evidence("trung sa", "da lat"), classifier_score=0.9),
        Verdict(image_id="clean", label=LABEL_POSITIVE, reason=REASON_EXCLUDES_LANDMARKS,
                evidence=evidence("can tho"), classifier_score=0.95),
        Verdict(image_id="skip", label=LABEL_NEGATIVE, reason=REASON_NOT_VIETNAM_MAP,
                classifier_score=0.1),
        Verdict(image_id="broken", label=LABEL_NEGATIVE, reason=REASON_ERROR,
                error_stage="decode", error_message="bad bytes"),
    ]


SWEEP_TRUTHS = {"near": "negative", "clean": "positive", "skip": "negative", "broken": "negative"}


def test_lambda_sweep_redecides_per_threshold():
    rows = lambda_sweep(sweep_verdicts(), SWEEP_TRUTHS, [1, 2])
    by_threshold = {row.threshold: row for row in rows}
    # strict comparator: d=1 matches only once the threshold passes 1
    assert by_threshold[1].reasons["near"] == REASON_EXCLUDES_LANDMARKS
    assert by_threshold[2].reasons["near"] == REASON_CONTAINS_LANDMARK
    assert by_threshold[1].matched_instances == 0
    assert by_threshold[2].matched_instances == 1
    assert by_threshold[2].report.counts.fp == 0
    assert by_threshold[1].report.counts.fp == 1


def test_lambda_sweep_passes_short_circuit_verdicts_through():
    rows = lambda_sweep(sweep_verdicts(), SWEEP_TRUTHS, [0, 1, 2, 5])
    for row in rows:
        assert row.reasons["skip"] == REASON_NOT_VIETNAM_MAP
        assert row.reasons["broken"] == REASON_ERROR


def test_lambda_sweep_rows_sorted_and_matched_monotone():
    rows = lambda_sweep(sweep_verdicts(), SWEEP_TRUTHS, [5, 1, 2])
    assert [row.threshold for row in rows] == [1, 2, 5]
    matched = [row.matched_instances for row in rows]
    assert matched == sorted(matched)


def test_lambda_sweep_single_threshold():
    rows = lambda_sweep(sweep_verdicts(), SWEEP_TRUTHS, [2])
    assert len(rows) == 1
    assert rows[0].report.metadata["lambda"] == 2


def test_lambda_sweep_respects_base_policy_comparator():
    # inclusive at threshold 1 accepts distance 1, strict does not
    strict = lambda_sweep(sweep_verdicts(), SWEEP_TRUTHS, [1])[0]
    inclusive = lambda_sweep(
        sweep_verdicts(), SWEEP_TRUTHS, [1], base_policy=MatchPolicy(comparator="inclusive")
    )[0]
    assert strict.matched_instances == 0
    assert inclusive.matched_instances == 1
    assert inclusive.report.metadata["comparator"] == "inclusive"


def test_render_sweep_table_layout():
    rows = lambda_sweep(sweep_verdicts(), SWEEP_TRUTHS, [1, 2, 5])
    text = render_sweep_table(rows)
    lines = text.splitlines()
    assert len(lines) == 3
    assert lines[0].split() == ["lambda", "1", "2", "5"]
    assert lines[1].split()[0] == "F1-Score"
    assert lines[2].split()[0] == "matched"
    for line in lines[1:]:
        assert len(line.split()) == 4


def test_report_json_rounds_percentages():
    report = build_report(ConfusionCounts(tp=1, fp=2, fn=0, tn=0))
    obj = report.to_json()
    assert obj["precision_pct"] == 33.33
    assert obj["recall_pct"] == 100.0
    assert obj["f1_pct"] == 50.0
    assert math.isclose(report.precision, 1 / 3)  # full precision kept internally


def test_report_json_includes_ap_and_metadata():
    report = build_report(ConfusionCounts(tp=1, fp=0, fn=0, tn=1), ap=0.875, corpus="toy")
    obj = report.to_json()
    assert obj["ap_pct"] == 87.5
    assert obj["metadata"] == {"corpus": "toy"}


def test_write_report_round_trips(tmp_path):
    report = build_report(ConfusionCounts(tp=3, fp=1, fn=1, tn=5), setting="VN")
    path = tmp_path / "report.json"
    write_report(path, report)
    obj = json.loads(path.read_text(encoding="utf-8"))
    assert obj["setting"] == "VN"
    assert obj["counts"] == {"tp": 3, "fp": 1, "fn": 1, "tn": 5}
    write_report(path, [report, report])
    assert json.loads(path.read_text(encoding="utf-8"))[1]["setting"] == "VN"
