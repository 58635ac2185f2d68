"""Precision / recall / F1, average precision, and the threshold sweep.

Metrics are computed as fractions in [0, 1]; report rendering multiplies
by 100 and rounds to two decimals.  Degenerate zero-denominator cases
evaluate to 0 and are flagged rather than raising.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from mapscreen.matching import MatchPolicy, match_any
from mapscreen.pipeline import (
    LABEL_POSITIVE,
    REASON_ERROR,
    REASON_NOT_VIETNAM_MAP,
    Verdict,
    decide,
)

__all__ = [
    "ConfusionCounts",
    "EvalReport",
    "EvaluationError",
    "RankedPrediction",
    "SweepRow",
    "average_precision",
    "confusion_from_verdicts",
    "f1",
    "lambda_sweep",
    "precision",
    "ranking_score",
    "recall",
    "render_sweep_table",
]


class EvaluationError(ValueError):
    """Raised when verdicts and ground truths cannot be joined."""


@dataclass(frozen=True)
class ConfusionCounts:
    """Binary confusion counts; positive = map excludes the landmarks."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision_degenerate(self) -> bool:
        return self.tp + self.fp == 0

    @property
    def recall_degenerate(self) -> bool:
        return self.tp + self.fn == 0


def precision(counts: ConfusionCounts) -> float:
    """tp / (tp + fp); 0 when no positive predictions exist."""
    if counts.precision_degenerate:
        return 0.0
    return counts.tp / (counts.tp + counts.fp)


def recall(counts: ConfusionCounts) -> float:
    """tp / (tp + fn); 0 when no positive ground truths exist."""
    if counts.recall_degenerate:
        return 0.0
    return counts.tp / (counts.tp + counts.fn)


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0.

    Scale-agnostic: feeding percentages yields a percentage.
    """
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass(frozen=True)
class EvalReport:
    """Metrics for one evaluation setting."""

    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    ap: float | None = None
    setting: str = "ENG-VN"
    degenerate: tuple[str, ...] = ()
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        obj = {
            "setting": self.setting,
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp, "fn": self.counts.fn, "tn": self.counts.tn},
            "precision_pct": round(100.0 * self.precision, 2),
            "recall_pct": round(100.0 * self.recall, 2),
            "f1_pct": round(100.0 * self.f1, 2),
        }
        if self.ap is not None:
            obj["ap_pct"] = round(100.0 * self.ap, 2)
        if self.degenerate:
            obj["degenerate"] = list(self.degenerate)
        if self.metadata:
            obj["metadata"] = dict(self.metadata)
        return obj


def build_report(counts: ConfusionCounts, ap: float | None = None, setting: str = "ENG-VN", **metadata) -> EvalReport:
    p = precision(counts)
    r = recall(counts)
    degenerate = tuple(
        name
        for name, is_degenerate in (
            ("precision", counts.precision_degenerate),
            ("recall", counts.recall_degenerate),
        )
        if is_degenerate
    )
    return EvalReport(
        counts=counts,
        precision=p,
        recall=r,
        f1=f1(p, r),
        ap=ap,
        setting=setting,
        degenerate=degenerate,
        metadata=metadata,
    )


def confusion_from_verdicts(
    verdicts: Iterable[Verdict],
    ground_truths: Mapping[str, str],
) -> ConfusionCounts:
    """Count tp/fp/fn/tn by joining verdicts to truths on image_id.

    Error verdicts count as predicted negative.  The verdict and truth
    id sets must coincide exactly.
    """
    by_id = {v.image_id: v for v in verdicts}
    missing = sorted(set(ground_truths) - set(by_id))
    extra = sorted(set(by_id) - set(ground_truths))
    if missing or extra:
        raise EvaluationError(
            f"verdicts and ground truths disagree: missing verdicts for {missing}, unexpected verdicts for {extra}"
        )
    tp = fp = fn = tn = 0
    for image_id, truth in ground_truths.items():
        predicted_positive = by_id[image_id].label == LABEL_POSITIVE
        actually_positive = truth == "positive"
        if predicted_positive and actually_positive:
            tp += 1
        elif predicted_positive:
            fp += 1
        elif actually_positive:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True)
class RankedPrediction:
    """One scored prediction with its binary ground truth."""

    image_id: str
    score: float
    ground_truth: str  # "positive" | "negative"


def average_precision(predictions: Sequence[RankedPrediction]) -> float:
    """AP over the score-ranked list: mean precision at each positive rank.

    Ties in score are broken by image_id so the ranking is deterministic.
    Raises when no positive ground truth exists.
    """
    n_positive = sum(1 for p in predictions if p.ground_truth == "positive")
    if n_positive == 0:
        raise EvaluationError("average precision needs at least one positive ground truth")
    ranked = sorted(predictions, key=lambda p: (-p.score, p.image_id))
    hits = 0
    total = 0.0
    for rank, prediction in enumerate(ranked, start=1):
        if prediction.ground_truth == "positive":
            hits += 1
            total += hits / rank
    return total / n_positive


def ranking_score(verdict: Verdict) -> float:
    """Composite-task ranking score derived from a verdict.

    Positive verdicts rank by classifier score shifted above every
    negative; negative verdicts rank by (1 - score) scaled into [0, 0.5].
    Error verdicts (no score) rank at the very bottom.
    """
    score = verdict.classifier_score
    if score is None:
        return -1.0
    if verdict.label == LABEL_POSITIVE:
        return 1.0 + score
    return (1.0 - score) / 2.0


@dataclass(frozen=True)
class SweepRow:
    """One threshold setting of the sweep with its re-decided outcomes."""

    threshold: int
    report: EvalReport
    matched_instances: int
    reasons: dict[str, str]  # image_id -> re-decided reason


def lambda_sweep(
    verdicts: Sequence[Verdict],
    ground_truths: Mapping[str, str],
    thresholds: Sequence[int],
    base_policy: MatchPolicy | None = None,
    setting: str = "ENG-VN",
) -> list[SweepRow]:
    """Re-run matching and decision for each threshold without backends.

    Verdict evidence carries every recognized instance in normalized
    form, which is all the matcher needs, so only vocabulary matching
    and the decision rule are recomputed per threshold.  Rows are
    ordered by threshold.
    """
    base = base_policy or MatchPolicy()
    rows: list[SweepRow] = []
    for threshold in sorted(thresholds):
        policy = replace(base, threshold=threshold)
        re_decided: list[Verdict] = []
        matched_instances = 0
        reasons: dict[str, str] = {}
        for verdict in verdicts:
            if verdict.reason in (REASON_NOT_VIETNAM_MAP, REASON_ERROR):
                re_decided.append(verdict)
                reasons[verdict.image_id] = verdict.reason
                continue
            texts = [m.input_normalized for m in verdict.evidence]
            outcome = match_any(texts, policy)
            matched_instances += sum(1 for m in outcome.matches if m.matched)
            label, reason = decide(True, outcome)
            re_decided.append(replace(verdict, label=label, reason=reason, evidence=outcome.matches))
            reasons[verdict.image_id] = reason
        counts = confusion_from_verdicts(re_decided, ground_truths)
        report = build_report(counts, setting=setting, **{"lambda": threshold, "comparator": base.comparator})
        rows.append(SweepRow(threshold=threshold, report=report, matched_instances=matched_instances, reasons=reasons))
    return rows


def render_sweep_table(rows: Sequence[SweepRow]) -> str:
    """Plain-text aligned table: one column per threshold, F1 row below."""
    header = ["lambda"] + [str(r.threshold) for r in rows]
    f1_row = ["F1-Score"] + [f"{100.0 * r.report.f1:.2f}" for r in rows]
    matched_row = ["matched"] + [str(r.matched_instances) for r in rows]
    widths = [max(len(col[i]) for col in (header, f1_row, matched_row)) for i in range(len(header))]
    lines = [
        "  ".join(cell.rjust(width) for cell, width in zip(row, widths))
        for row in (header, f1_row, matched_row)
    ]
    return "\n".join(lines)


def write_report(path: Path | str, report: EvalReport | list[EvalReport]) -> None:
    payload = [r.to_json() for r in report] if isinstance(report, list) else report.to_json()
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
