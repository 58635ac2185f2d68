"""Stage backends that run TorchScript model bundles.

A bundle is a directory holding ``classifier.pt``, ``detector.pt`` and
``recognizer.pt`` (TorchScript modules) plus ``meta.json`` describing
preprocessing and label sets, either per stage (keys ``classifier`` /
``detector`` / ``recognizer``) or flat for all three.

Model contracts:
  classifier  (1,3,H,W) float -> (1,2) logits, softmax index of the
              "vietnam_map" label is the map probability
  detector    (1,3,H,W) float -> (1,1,h,w) text probability map
  recognizer  (1,3,H,W) float -> (1,T,C) per-step logits, CTC with
              blank at class 0

torch, cv2 and shapely are imported lazily so the rest of the package
works without the model extra installed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from mapscreen.inference import (
    BackendDescriptor,
    BackendError,
    ImageHandle,
    MapClassOutput,
    ModelLoadError,
    RecognizedInstance,
    TextRegion,
    _require_positive_area,
)

__all__ = [
    "ModelFileClassifier",
    "ModelFileDetector",
    "ModelFileRecognizer",
    "load_meta",
    "order_quad",
    "stage_meta",
]

META_FILE = "meta.json"
STAGE_FILES = {
    "classifier": "classifier.pt",
    "detector": "detector.pt",
    "recognizer": "recognizer.pt",
}

# classifier defaults
DEFAULT_CLASSIFIER_SIZE = (380, 380)
DEFAULT_CLASSIFIER_LABELS = ("not_vietnam_map", "vietnam_map")
POSITIVE_LABEL = "vietnam_map"

# detector binarization and box filtering
PROB_THRESHOLD = 0.3
BOX_SCORE_MIN = 0.5
UNCLIP_RATIO = 1.5
MIN_BOX_SIDE = 3.0
MAX_CANDIDATES = 1000
DEFAULT_DETECTOR_SIZE = (736, 736)

DEFAULT_RECOGNIZER_SIZE = (32, 128)

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


def load_meta(bundle_dir: Path | str) -> dict:
    path = Path(bundle_dir) / META_FILE
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ModelLoadError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelLoadError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ModelLoadError(f"{path} must hold a JSON object")
    return data


def stage_meta(meta: dict, stage: str) -> dict:
    """Per-stage section layered over the flat top-level fields."""
    flat = {k: v for k, v in meta.items() if k not in STAGE_FILES}
    section = meta.get(stage, {})
    if not isinstance(section, dict):
        raise ModelLoadError(f"meta section {stage!r} must be an object")
    return {**flat, **section}


def _load_module(bundle_dir: Path | str, stage: str):
    import torch

    path = Path(bundle_dir) / STAGE_FILES[stage]
    if not path.is_file():
        raise ModelLoadError(f"bundle is missing {path.name} ({path})")
    try:
        module = torch.jit.load(str(path), map_location="cpu")
    except Exception as exc:
        raise ModelLoadError(f"cannot load {path}: {exc}") from exc
    module.eval()
    return module


def _size_from(meta: dict, default: tuple[int, int]) -> tuple[int, int]:
    value = meta.get("input_size", default)
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and v > 0 for v in value)
    ):
        raise ModelLoadError(f"input_size must be [height, width], got {value!r}")
    return int(value[0]), int(value[1])


def _stats_from(meta: dict) -> tuple[np.ndarray, np.ndarray]:
    mean = meta.get("mean", _IMAGENET_MEAN)
    std = meta.get("std", _IMAGENET_STD)
    mean_arr = np.asarray(mean, dtype=np.float32)
    std_arr = np.asarray(std, dtype=np.float32)
    if mean_arr.shape != (3,) or std_arr.shape != (3,) or np.any(std_arr <= 0):
        raise ModelLoadError(f"mean/std must be 3 channel values with std > 0, got {mean!r}/{std!r}")
    return mean_arr, std_arr


def _to_tensor(pixels: np.ndarray, mean: np.ndarray, std: np.ndarray):
    import torch

    scaled = (pixels.astype(np.float32) / 255.0 - mean) / std
    return torch.from_numpy(np.ascontiguousarray(scaled.transpose(2, 0, 1)))[None]


def _resize(pixels: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    import cv2

    height, width = size
    return cv2.resize(pixels, (width, height), interpolation=cv2.INTER_LINEAR)


def order_quad(points: np.ndarray) -> np.ndarray:
    """Order 4 vertices as top-left, top-right, bottom-right, bottom-left."""
    pts = np.asarray(points, dtype=np.float32).reshape(4, 2)
    sums = pts.sum(axis=1)
    diffs = pts[:, 1] - pts[:, 0]  # y - x
    ordered = np.zeros((4, 2), dtype=np.float32)
    ordered[0] = pts[np.argmin(sums)]
    ordered[2] = pts[np.argmax(sums)]
    ordered[1] = pts[np.argmin(diffs)]
    ordered[3] = pts[np.argmax(diffs)]
    return ordered


class ModelFileClassifier:
    """Binary map classifier backed by a TorchScript module."""

    def __init__(self, bundle_dir: Path | str, threshold: float = 0.5):
        self.module = _load_module(bundle_dir, "classifier")
        meta = stage_meta(load_meta(bundle_dir), "classifier")
        self.size = _size_from(meta, DEFAULT_CLASSIFIER_SIZE)
        self.mean, self.std = _stats_from(meta)
        labels = meta.get("labels", list(DEFAULT_CLASSIFIER_LABELS))
        if POSITIVE_LABEL not in labels:
            raise ModelLoadError(f"classifier labels {labels!r} lack {POSITIVE_LABEL!r}")
        self.positive_index = list(labels).index(POSITIVE_LABEL)
        self.threshold = threshold
        self.descriptor = BackendDescriptor(kind="model-file", identifier=str(bundle_dir))

    def classify(self, image: ImageHandle) -> MapClassOutput:
        import torch

        batch = _to_tensor(_resize(image.pixels(), self.size), self.mean, self.std)
        try:
            with torch.no_grad():
                logits = self.module(batch)
        except Exception as exc:
            raise BackendError(f"classifier forward failed on {image.image_id}: {exc}") from exc
        probs = torch.softmax(logits.reshape(-1), dim=0)
        if probs.numel() <= self.positive_index:
            raise BackendError(
                f"classifier produced {probs.numel()} logits, need index {self.positive_index}"
            )
        score = float(probs[self.positive_index])
        return MapClassOutput(is_vietnam_map=score >= self.threshold, score=score)


def _box_score(prob_map: np.ndarray, quad: np.ndarray) -> float:
    """Mean probability inside the quad, computed on its bounding crop."""
    import cv2

    h, w = prob_map.shape
    x0 = int(np.clip(np.floor(quad[:, 0].min()), 0, w - 1))
    x1 = int(np.clip(np.ceil(quad[:, 0].max()), 0, w - 1))
    y0 = int(np.clip(np.floor(quad[:, 1].min()), 0, h - 1))
    y1 = int(np.clip(np.ceil(quad[:, 1].max()), 0, h - 1))
    mask = np.zeros((y1 - y0 + 1, x1 - x0 + 1), dtype=np.uint8)
    shifted = np.round(quad - [x0, y0]).astype(np.int32)
    cv2.fillPoly(mask, [shifted], 1)
    if mask.sum() == 0:
        return 0.0
    return float(cv2.mean(prob_map[y0 : y1 + 1, x0 : x1 + 1], mask)[0])


def _unclip(quad: np.ndarray, ratio: float) -> np.ndarray | None:
    """Expand the quad outward proportionally to its area / perimeter."""
    import cv2
    from shapely.geometry import Polygon

    poly = Polygon(quad)
    if poly.area <= 0 or poly.length <= 0:
        return None
    distance = poly.area * ratio / poly.length
    expanded = poly.buffer(distance, join_style=2)
    if expanded.is_empty:
        return None
    coords = np.asarray(expanded.exterior.coords, dtype=np.float32)
    rect = cv2.minAreaRect(coords)
    return cv2.boxPoints(rect)


class ModelFileDetector:
    """Text detector decoding a probability map into quadrilaterals.

    The map is binarized at :data:`PROB_THRESHOLD`; connected components
    become rotated rectangles, kept when their mean probability reaches
    :data:`BOX_SCORE_MIN`, expanded by :data:`UNCLIP_RATIO`, and mapped
    back into original-image pixel coordinates.
    """

    def __init__(self, bundle_dir: Path | str):
        self.module = _load_module(bundle_dir, "detector")
        meta = stage_meta(load_meta(bundle_dir), "detector")
        self.size = _size_from(meta, DEFAULT_DETECTOR_SIZE)
        self.mean, self.std = _stats_from(meta)
        self.descriptor = BackendDescriptor(kind="model-file", identifier=str(bundle_dir))

    def detect(self, image: ImageHandle) -> list[TextRegion]:
        import cv2
        import torch

        pixels = image.pixels()
        orig_h, orig_w = pixels.shape[:2]
        batch = _to_tensor(_resize(pixels, self.size), self.mean, self.std)
        try:
            with torch.no_grad():
                out = self.module(batch)
        except Exception as exc:
            raise BackendError(f"detector forward failed on {image.image_id}: {exc}") from exc
        prob_map = out.detach().cpu().numpy().squeeze()
        if prob_map.ndim != 2:
            raise BackendError(f"detector output has shape {tuple(out.shape)}, want a single map")
        if prob_map.min() < 0.0 or prob_map.max() > 1.0:  # raw logits
            prob_map = 1.0 / (1.0 + np.exp(-prob_map))

        mask = (prob_map > PROB_THRESHOLD).astype(np.uint8)
        contours, _ = cv2.findContours(mask, cv2.RETR_LIST, cv2.CHAIN_APPROX_SIMPLE)
        map_h, map_w = prob_map.shape
        scale_x = orig_w / map_w
        scale_y = orig_h / map_h

        regions: list[TextRegion] = []
        for contour in contours[:MAX_CANDIDATES]:
            rect = cv2.minAreaRect(contour)
            if min(rect[1]) < MIN_BOX_SIDE:
                continue
            quad = cv2.boxPoints(rect)
            score = _box_score(prob_map, quad)
            if score < BOX_SCORE_MIN:
                continue
            expanded = _unclip(quad, UNCLIP_RATIO)
            if expanded is None:
                continue
            ordered = order_quad(expanded)
            ordered[:, 0] = np.clip(ordered[:, 0] * scale_x, 0, orig_w - 1)
            ordered[:, 1] = np.clip(ordered[:, 1] * scale_y, 0, orig_h - 1)
            regions.append(
                TextRegion(
                    polygon=tuple((float(x), float(y)) for x, y in ordered),
                    score=round(score, 4),
                )
            )
        regions.sort(key=lambda r: (-r.score, r.polygon))
        return regions


class ModelFileRecognizer:
    """CTC text recognizer over perspective-rectified region crops."""

    def __init__(self, bundle_dir: Path | str):
        self.module = _load_module(bundle_dir, "recognizer")
        meta = stage_meta(load_meta(bundle_dir), "recognizer")
        self.size = _size_from(meta, DEFAULT_RECOGNIZER_SIZE)
        self.mean, self.std = _stats_from(meta)
        labels = meta.get("labels")
        if not isinstance(labels, list) or len(labels) < 2:
            raise ModelLoadError("recognizer meta needs 'labels': [blank, char, ...]")
        self.charset: Sequence[str] = labels
        self.descriptor = BackendDescriptor(kind="model-file", identifier=str(bundle_dir))

    def _rectify(self, pixels: np.ndarray, region: TextRegion) -> np.ndarray:
        import cv2

        height, width = self.size
        src = order_quad(np.asarray(region.polygon, dtype=np.float32))
        dst = np.asarray(
            [(0, 0), (width - 1, 0), (width - 1, height - 1), (0, height - 1)],
            dtype=np.float32,
        )
        transform = cv2.getPerspectiveTransform(src, dst)
        return cv2.warpPerspective(pixels, transform, (width, height))

    def recognize(self, image: ImageHandle, region: TextRegion) -> RecognizedInstance:
        import torch

        _require_positive_area(region)
        try:
            crop = self._rectify(image.pixels(), region)
            batch = _to_tensor(crop, self.mean, self.std)
            with torch.no_grad():
                logits = self.module(batch)
            steps = logits.reshape(logits.shape[-2], logits.shape[-1])  # (T, C)
            probs = torch.softmax(steps, dim=1).cpu().numpy()
        except Exception:
            # unreadable crop; the pipeline drops empty-text instances
            return RecognizedInstance(region=region, text="", confidence=0.0)

        best = probs.argmax(axis=1)
        chars: list[str] = []
        confidences: list[float] = []
        previous = -1
        for step, index in enumerate(best):
            if index != previous and index != 0:
                if index < len(self.charset):
                    chars.append(self.charset[index])
                    confidences.append(float(probs[step, index]))
            previous = index
        if not chars:
            return RecognizedInstance(region=region, text="", confidence=0.0)
        return RecognizedInstance(
            region=region,
            text="".join(chars),
            confidence=float(np.mean(confidences)),
        )
