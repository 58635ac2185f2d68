"""Model-stage contracts and the mock / cached backend implementations.

Three stages feed the pipeline: map classification, text detection, and
text recognition.  Each stage is a small protocol so the pipeline's
behavior depends only on backend outputs, never on backend kind.  Mock
backends return fixture data; cached backends replay predictions from
JSON-lines files; the heavyweight model-file backends live in
:mod:`mapscreen.modelfile`.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

__all__ = [
    "BackendDescriptor",
    "BackendError",
    "CacheMissError",
    "CachedClassifier",
    "CachedDetector",
    "CachedRecognizer",
    "ClassifierBackend",
    "DegenerateRegionError",
    "DetectorBackend",
    "ImageDecodeError",
    "ImageHandle",
    "MapClassOutput",
    "MockClassifier",
    "MockDetector",
    "MockRecognizer",
    "ModelLoadError",
    "RecognizedInstance",
    "RecognizerBackend",
    "TextRegion",
    "polygon_area",
    "read_classification_cache",
    "read_detection_cache",
    "read_recognition_cache",
    "write_classification_cache",
    "write_detection_cache",
    "write_recognition_cache",
]

CLASSIFICATION_CACHE = "classification.jsonl"
DETECTION_CACHE = "detection.jsonl"
RECOGNITION_CACHE = "recognition.jsonl"


class BackendError(RuntimeError):
    """A backend failed for one input; the batch must continue."""


class ModelLoadError(BackendError):
    """A model bundle could not be loaded."""


class CacheMissError(BackendError):
    """The prediction cache holds no entry for the requested image."""


class ImageDecodeError(RuntimeError):
    """The image file could not be read or decoded."""


class DegenerateRegionError(ValueError):
    """A text region polygon has zero area."""


def polygon_area(polygon: Sequence[tuple[float, float]]) -> float:
    area = 0.0
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


@dataclass(frozen=True)
class MapClassOutput:
    """Binary map-classification output with its confidence score."""

    is_vietnam_map: bool
    score: float


@dataclass(frozen=True)
class TextRegion:
    """A detected text region: quadrilateral vertices plus a score."""

    polygon: tuple[tuple[float, float], ...]  # 4 vertices, (x, y) pixels
    score: float

    def flat(self) -> list[float]:
        return [v for vertex in self.polygon for v in vertex]

    def area(self) -> float:
        return polygon_area(self.polygon)


def region_from_flat(values: Sequence[float], score: float) -> TextRegion:
    if len(values) != 8:
        raise ValueError(f"polygon must have 8 numbers, got {len(values)}")
    vertices = tuple((float(values[i]), float(values[i + 1])) for i in range(0, 8, 2))
    return TextRegion(polygon=vertices, score=float(score))


@dataclass(frozen=True)
class RecognizedInstance:
    """A detected region with its recognized text; empty text means unreadable."""

    region: TextRegion
    text: str
    confidence: float


@dataclass(frozen=True)
class BackendDescriptor:
    """Names a backend implementation and whether workers may share it."""

    kind: str  # "mock" | "cached" | "model-file"
    identifier: str = ""
    shareable: bool = True


class ImageHandle:
    """Lazy reference to an image: decode happens only when pixels are needed.

    Mock and cached backends key on ``image_id`` alone, so batches built
    from prediction caches run without any image files on disk.
    """

    def __init__(self, image_id: str, path: Path | str | None = None, pixels: np.ndarray | None = None):
        self.image_id = image_id
        self.path = Path(path) if path is not None else None
        self._pixels = pixels

    def pixels(self) -> np.ndarray:
        """Decoded RGB uint8 array of shape (H, W, 3)."""
        if self._pixels is None:
            if self.path is None:
                raise ImageDecodeError(f"{self.image_id}: no pixel source")
            try:
                from PIL import Image

                with Image.open(self.path) as img:
                    self._pixels = np.asarray(img.convert("RGB"))
            except ImageDecodeError:
                raise
            except Exception as exc:
                raise ImageDecodeError(f"{self.image_id}: cannot decode {self.path}: {exc}") from exc
            if self._pixels.size == 0:
                self._pixels = None
                raise ImageDecodeError(f"{self.image_id}: image has zero area")
        return self._pixels


class ClassifierBackend(Protocol):
    descriptor: BackendDescriptor

    def classify(self, image: ImageHandle) -> MapClassOutput: ...


class DetectorBackend(Protocol):
    descriptor: BackendDescriptor

    def detect(self, image: ImageHandle) -> list[TextRegion]: ...


class RecognizerBackend(Protocol):
    descriptor: BackendDescriptor

    def recognize(self, image: ImageHandle, region: TextRegion) -> RecognizedInstance: ...


def _require_positive_area(region: TextRegion) -> None:
    if region.area() <= 0.0:
        raise DegenerateRegionError(f"region polygon {region.polygon} has zero area")


class _CallCounter:
    """Thread-safe invocation counter shared by the mock backends."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls = 0

    def bump(self) -> None:
        with self._lock:
            self.calls += 1


class MockClassifier(_CallCounter):
    """Fixture classifier keyed 'vn-map' (always map) or 'not-map' (never)."""

    def __init__(self, key: str = "vn-map"):
        super().__init__()
        if key not in ("vn-map", "not-map"):
            raise ValueError(f"unknown mock classifier key {key!r}")
        self.key = key
        self.descriptor = BackendDescriptor(kind="mock", identifier=key, shareable=True)

    def classify(self, image: ImageHandle) -> MapClassOutput:
        self.bump()
        if self.key == "vn-map":
            return MapClassOutput(is_vietnam_map=True, score=1.0)
        return MapClassOutput(is_vietnam_map=False, score=0.0)


class MockDetector(_CallCounter):
    """Fixture detector returning the same regions for every image."""

    def __init__(self, regions: Sequence[TextRegion] = ()):
        super().__init__()
        self.regions = sorted(regions, key=lambda r: -r.score)
        self.descriptor = BackendDescriptor(kind="mock", identifier=f"{len(self.regions)} regions", shareable=True)

    def detect(self, image: ImageHandle) -> list[TextRegion]:
        self.bump()
        return list(self.regions)


class MockRecognizer(_CallCounter):
    """Fixture recognizer mapping region polygons to fixed strings."""

    def __init__(self, texts: dict[tuple[float, ...], str] | None = None, default: str = ""):
        super().__init__()
        self.texts = dict(texts or {})
        self.default = default
        self.descriptor = BackendDescriptor(kind="mock", identifier=f"{len(self.texts)} texts", shareable=True)

    def recognize(self, image: ImageHandle, region: TextRegion) -> RecognizedInstance:
        self.bump()
        _require_positive_area(region)
        text = self.texts.get(tuple(region.flat()), self.default)
        return RecognizedInstance(region=region, text=text, confidence=1.0 if text else 0.0)


# --- prediction cache format: one JSON-lines file per stage ----------------


def write_classification_cache(path: Path | str, scores: dict[str, float], threshold: float = 0.5) -> None:
    lines = [
        json.dumps({"image_id": image_id, "is_vietnam_map": score >= threshold, "score": score})
        for image_id, score in scores.items()
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_classification_cache(path: Path | str) -> dict[str, float]:
    scores: dict[str, float] = {}
    for obj in _read_jsonl(path):
        scores[str(obj["image_id"])] = float(obj["score"])
    return scores


def write_detection_cache(path: Path | str, regions: dict[str, Sequence[TextRegion]]) -> None:
    lines = [
        json.dumps(
            {
                "image_id": image_id,
                "regions": [{"polygon": r.flat(), "score": r.score} for r in image_regions],
            }
        )
        for image_id, image_regions in regions.items()
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_detection_cache(path: Path | str) -> dict[str, list[TextRegion]]:
    regions: dict[str, list[TextRegion]] = {}
    for obj in _read_jsonl(path):
        regions[str(obj["image_id"])] = [
            region_from_flat(r["polygon"], r["score"]) for r in obj.get("regions", [])
        ]
    return regions


def write_recognition_cache(path: Path | str, instances: dict[str, Sequence[RecognizedInstance]]) -> None:
    lines = [
        json.dumps(
            {
                "image_id": image_id,
                "instances": [
                    {
                        "polygon": inst.region.flat(),
                        "region_score": inst.region.score,
                        "text": inst.text,
                        "confidence": inst.confidence,
                    }
                    for inst in image_instances
                ],
            },
            ensure_ascii=False,
        )
        for image_id, image_instances in instances.items()
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_recognition_cache(path: Path | str) -> dict[str, list[RecognizedInstance]]:
    instances: dict[str, list[RecognizedInstance]] = {}
    for obj in _read_jsonl(path):
        instances[str(obj["image_id"])] = [
            RecognizedInstance(
                region=region_from_flat(i["polygon"], i.get("region_score", 0.0)),
                text=str(i["text"]),
                confidence=float(i["confidence"]),
            )
            for i in obj.get("instances", [])
        ]
    return instances


def _read_jsonl(path: Path | str) -> list[dict]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append(json.loads(line))
    return rows


class CachedClassifier:
    """Replays classification scores; the decision threshold is applied on read."""

    def __init__(self, cache_dir: Path | str, threshold: float = 0.5):
        path = Path(cache_dir) / CLASSIFICATION_CACHE
        if not path.is_file():
            raise ModelLoadError(f"missing classification cache {path}")
        self.scores = read_classification_cache(path)
        self.threshold = threshold
        self.descriptor = BackendDescriptor(kind="cached", identifier=str(cache_dir), shareable=True)

    def classify(self, image: ImageHandle) -> MapClassOutput:
        try:
            score = self.scores[image.image_id]
        except KeyError:
            raise CacheMissError(f"no cached classification for {image.image_id!r}") from None
        return MapClassOutput(is_vietnam_map=score >= self.threshold, score=score)


class CachedDetector:
    """Replays detected regions, sorted by descending score."""

    def __init__(self, cache_dir: Path | str):
        path = Path(cache_dir) / DETECTION_CACHE
        if not path.is_file():
            raise ModelLoadError(f"missing detection cache {path}")
        self.regions = {
            image_id: sorted(regions, key=lambda r: -r.score)
            for image_id, regions in read_detection_cache(path).items()
        }
        self.descriptor = BackendDescriptor(kind="cached", identifier=str(cache_dir), shareable=True)

    def detect(self, image: ImageHandle) -> list[TextRegion]:
        try:
            return list(self.regions[image.image_id])
        except KeyError:
            raise CacheMissError(f"no cached detection for {image.image_id!r}") from None


class CachedRecognizer:
    """Replays recognized text, keyed by (image_id, region polygon)."""

    def __init__(self, cache_dir: Path | str):
        path = Path(cache_dir) / RECOGNITION_CACHE
        if not path.is_file():
            raise ModelLoadError(f"missing recognition cache {path}")
        self.texts: dict[tuple[str, tuple[float, ...]], RecognizedInstance] = {}
        for image_id, instances in read_recognition_cache(path).items():
            for inst in instances:
                self.texts[(image_id, tuple(inst.region.flat()))] = inst
        self.descriptor = BackendDescriptor(kind="cached", identifier=str(cache_dir), shareable=True)

    def recognize(self, image: ImageHandle, region: TextRegion) -> RecognizedInstance:
        _require_positive_area(region)
        key = (image.image_id, tuple(region.flat()))
        try:
            cached = self.texts[key]
        except KeyError:
            raise CacheMissError(f"no cached recognition for {image.image_id!r} region {region.polygon}") from None
        return RecognizedInstance(region=region, text=cached.text, confidence=cached.confidence)
