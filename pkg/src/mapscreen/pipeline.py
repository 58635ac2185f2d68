"""Four-stage screening pipeline and the per-image decision rule.

An image is Positive exactly when it is classified as a Vietnam map and
none of its recognized text matches the landmark vocabulary.  Everything
else is Negative: non-maps, non-Vietnam maps, and maps where a landmark
name was found.  Images that cannot be processed yield error verdicts
which count as Negative downstream.
"""

from __future__ import annotations

import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from mapscreen.inference import (
    BackendDescriptor,
    BackendError,
    CachedClassifier,
    CachedDetector,
    CachedRecognizer,
    ClassifierBackend,
    DetectorBackend,
    ImageDecodeError,
    ImageHandle,
    MockClassifier,
    MockDetector,
    MockRecognizer,
    RecognizerBackend,
)
from mapscreen.matching import MatchOutcome, MatchPolicy, MatchResult, match_any

__all__ = [
    "PipelineConfig",
    "RunSummary",
    "ScreenItem",
    "StageBackends",
    "Verdict",
    "build_backends",
    "decide",
    "read_verdicts",
    "screen_batch",
    "screen_image",
    "write_verdicts",
]

LABEL_POSITIVE = "positive"
LABEL_NEGATIVE = "negative"

REASON_NOT_VIETNAM_MAP = "not_vietnam_map"
REASON_CONTAINS_LANDMARK = "contains_landmark"
REASON_EXCLUDES_LANDMARKS = "excludes_landmarks"
REASON_ERROR = "error"  # third outcome: unprocessable image, counts as negative

REASONS = (REASON_NOT_VIETNAM_MAP, REASON_CONTAINS_LANDMARK, REASON_EXCLUDES_LANDMARKS, REASON_ERROR)


@dataclass(frozen=True)
class Verdict:
    """Pipeline output for one image.

    ``label`` is positive exactly when ``reason`` is excludes_landmarks.
    ``classifier_score`` is None only on error verdicts where
    classification never completed.
    """

    image_id: str
    label: str
    reason: str
    evidence: tuple[MatchResult, ...] = ()
    classifier_score: float | None = None
    error_stage: str | None = None
    error_message: str | None = None


@dataclass(frozen=True)
class StageBackends:
    """The three stage backends a screening run invokes."""

    classifier: ClassifierBackend
    detector: DetectorBackend
    recognizer: RecognizerBackend

    @property
    def all_shareable(self) -> bool:
        return all(
            b.descriptor.shareable for b in (self.classifier, self.detector, self.recognizer)
        )


@dataclass(frozen=True)
class PipelineConfig:
    """Everything a screening run needs besides the input images."""

    policy: MatchPolicy = field(default_factory=MatchPolicy)
    classifier_threshold: float = 0.5
    classifier: BackendDescriptor = BackendDescriptor(kind="mock", identifier="vn-map")
    detector: BackendDescriptor = BackendDescriptor(kind="mock")
    recognizer: BackendDescriptor = BackendDescriptor(kind="mock")
    parallelism: int = 1

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not (0.0 < self.classifier_threshold < 1.0):
            raise ValueError("classifier_threshold must lie in (0, 1)")


ScreenItem = tuple[str, "Path | str | None"]  # (image_id, path)


def items_from_manifest(entries: Iterable, manifest_dir: Path | str | None = None) -> list[ScreenItem]:
    """Build screen items from manifest entries, resolving relative paths."""
    items: list[ScreenItem] = []
    for entry in entries:
        path = entry.resolve_path(manifest_dir) if manifest_dir is not None else entry.path
        items.append((entry.image_id, path))
    return items


def build_backends(config: PipelineConfig) -> StageBackends:
    """Instantiate the stage backends named by the config descriptors."""
    return StageBackends(
        classifier=_build_classifier(config),
        detector=_build_detector(config.detector),
        recognizer=_build_recognizer(config.recognizer),
    )


def _build_classifier(config: PipelineConfig) -> ClassifierBackend:
    desc = config.classifier
    if desc.kind == "mock":
        return MockClassifier(desc.identifier or "vn-map")
    if desc.kind == "cached":
        return CachedClassifier(desc.identifier, threshold=config.classifier_threshold)
    if desc.kind == "model-file":
        from mapscreen.modelfile import ModelFileClassifier

        return ModelFileClassifier(desc.identifier, threshold=config.classifier_threshold)
    raise ValueError(f"unknown classifier backend kind {desc.kind!r}")


def _build_detector(desc: BackendDescriptor) -> DetectorBackend:
    if desc.kind == "mock":
        return MockDetector()
    if desc.kind == "cached":
        return CachedDetector(desc.identifier)
    if desc.kind == "model-file":
        from mapscreen.modelfile import ModelFileDetector

        return ModelFileDetector(desc.identifier)
    raise ValueError(f"unknown detector backend kind {desc.kind!r}")


def _build_recognizer(desc: BackendDescriptor) -> RecognizerBackend:
    if desc.kind == "mock":
        return MockRecognizer()
    if desc.kind == "cached":
        return CachedRecognizer(desc.identifier)
    if desc.kind == "model-file":
        from mapscreen.modelfile import ModelFileRecognizer

        return ModelFileRecognizer(desc.identifier)
    raise ValueError(f"unknown recognizer backend kind {desc.kind!r}")


def decide(is_vietnam_map: bool, outcome: MatchOutcome) -> tuple[str, str]:
    """Map (classification, match outcome) to (label, reason).

    Exhaustive: not a Vietnam map -> negative/not_vietnam_map; a Vietnam
    map with a match -> negative/contains_landmark; a Vietnam map with no
    match -> positive/excludes_landmarks.
    """
    if not is_vietnam_map:
        return LABEL_NEGATIVE, REASON_NOT_VIETNAM_MAP
    if outcome.any_matched:
        return LABEL_NEGATIVE, REASON_CONTAINS_LANDMARK
    return LABEL_POSITIVE, REASON_EXCLUDES_LANDMARKS


def _error_verdict(image_id: str, stage: str, exc: Exception, score: float | None = None) -> Verdict:
    return Verdict(
        image_id=image_id,
        label=LABEL_NEGATIVE,
        reason=REASON_ERROR,
        evidence=(),
        classifier_score=score,
        error_stage=stage,
        error_message=str(exc),
    )


def screen_image(item: ScreenItem, backends: StageBackends, config: PipelineConfig) -> Verdict:
    """Run the full pipeline on one image.

    Short-circuits after classification for non-Vietnam-maps: the
    detector and recognizer are never invoked for them.  Failures never
    propagate; they become error verdicts.
    """
    image_id, path = item
    image = ImageHandle(image_id, path)

    try:
        classification = backends.classifier.classify(image)
    except ImageDecodeError as exc:
        return _error_verdict(image_id, "decode", exc)
    except BackendError as exc:
        return _error_verdict(image_id, "classification", exc)
    if not classification.is_vietnam_map:
        return Verdict(
            image_id=image_id,
            label=LABEL_NEGATIVE,
            reason=REASON_NOT_VIETNAM_MAP,
            evidence=(),
            classifier_score=classification.score,
        )

    try:
        regions = backends.detector.detect(image)
    except ImageDecodeError as exc:
        return _error_verdict(image_id, "decode", exc, classification.score)
    except BackendError as exc:
        return _error_verdict(image_id, "detection", exc, classification.score)

    texts: list[str] = []
    try:
        for region in regions:
            instance = backends.recognizer.recognize(image, region)
            if instance.text:  # unreadable crops are skipped before matching
                texts.append(instance.text)
    except ImageDecodeError as exc:
        return _error_verdict(image_id, "decode", exc, classification.score)
    except BackendError as exc:
        return _error_verdict(image_id, "recognition", exc, classification.score)

    outcome = match_any(texts, config.policy)
    label, reason = decide(True, outcome)
    return Verdict(
        image_id=image_id,
        label=label,
        reason=reason,
        evidence=outcome.matches,
        classifier_score=classification.score,
    )


@dataclass(frozen=True)
class RunSummary:
    """Per-reason verdict counts for one batch."""

    total: int
    counts: dict[str, int]

    def to_json(self) -> dict:
        return {"type": "summary", "total": self.total, "counts": {r: self.counts.get(r, 0) for r in REASONS}}


def summarize(verdicts: Sequence[Verdict]) -> RunSummary:
    counts: dict[str, int] = {}
    for v in verdicts:
        counts[v.reason] = counts.get(v.reason, 0) + 1
    return RunSummary(total=len(verdicts), counts=counts)


def screen_batch(
    items: Sequence[ScreenItem],
    config: PipelineConfig,
    backends: StageBackends | Callable[[], StageBackends] | None = None,
) -> tuple[list[Verdict], RunSummary]:
    """Screen a batch; verdict order always matches the input order.

    Work is spread over ``config.parallelism`` threads.  Shareable
    backends are used by every worker; non-shareable ones are
    instantiated once per worker thread from the config (or the given
    factory).  Results are re-ordered by input index, so the output is
    independent of scheduling.
    """
    factory: Callable[[], StageBackends]
    if backends is None:
        factory = lambda: build_backends(config)
    elif isinstance(backends, StageBackends):
        if backends.all_shareable or config.parallelism == 1:
            shared = backends
            factory = lambda: shared
        else:
            raise ValueError("non-shareable backends need a factory when parallelism > 1")
    else:
        factory = backends

    if config.parallelism == 1 or len(items) <= 1:
        stage_backends = factory()
        verdicts = [screen_image(item, stage_backends, config) for item in items]
        return verdicts, summarize(verdicts)

    first = factory()
    if first.all_shareable:

        def worker_backends() -> StageBackends:
            return first

    else:
        local = threading.local()

        def worker_backends() -> StageBackends:
            got = getattr(local, "backends", None)
            if got is None:
                got = factory()
                local.backends = got
            return got

    def run(indexed: tuple[int, ScreenItem]) -> tuple[int, Verdict]:
        index, item = indexed
        return index, screen_image(item, worker_backends(), config)

    results: list[Verdict | None] = [None] * len(items)
    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        for index, verdict in pool.map(run, enumerate(items)):
            results[index] = verdict
    verdicts = [v for v in results if v is not None]
    assert len(verdicts) == len(items)
    return verdicts, summarize(verdicts)


# --- verdict report: JSON lines, one verdict per line, summary last --------


def _match_result_to_json(m: MatchResult) -> dict:
    return {
        "matched": m.matched,
        "term": m.term,
        "distance": m.distance,
        "input_normalized": m.input_normalized,
    }


def verdict_to_json(v: Verdict) -> dict:
    obj: dict = {
        "image_id": v.image_id,
        "label": v.label,
        "reason": v.reason,
        "evidence": [_match_result_to_json(m) for m in v.evidence],
        "classifier_score": v.classifier_score,
    }
    if v.reason == REASON_ERROR:
        obj["error_stage"] = v.error_stage
        obj["error_message"] = v.error_message
    return obj


def write_verdicts(path: Path | str, verdicts: Sequence[Verdict], summary: RunSummary) -> None:
    lines = [json.dumps(verdict_to_json(v), ensure_ascii=False) for v in verdicts]
    lines.append(json.dumps(summary.to_json(), ensure_ascii=False))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_verdicts(path: Path | str) -> tuple[list[Verdict], RunSummary | None]:
    verdicts: list[Verdict] = []
    summary: RunSummary | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj.get("type") == "summary":
            summary = RunSummary(total=int(obj["total"]), counts=dict(obj["counts"]))
            continue
        evidence = tuple(
            MatchResult(
                matched=bool(m["matched"]),
                term=m["term"],
                distance=m["distance"],
                input_normalized=str(m["input_normalized"]),
            )
            for m in obj.get("evidence", [])
        )
        verdicts.append(
            Verdict(
                image_id=str(obj["image_id"]),
                label=str(obj["label"]),
                reason=str(obj["reason"]),
                evidence=evidence,
                classifier_score=obj.get("classifier_score"),
                error_stage=obj.get("error_stage"),
                error_message=obj.get("error_message"),
            )
        )
    return verdicts, summary
