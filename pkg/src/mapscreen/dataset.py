"""Manifest parsing, validation, and statistics.

A manifest is UTF-8 JSON lines, one entry per line.  Image paths are
resolved relative to the manifest's directory.  The full schema is
documented in ``docs/formats.md``.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Literal

from mapscreen.matching import DEFAULT_TERMS
from mapscreen.textnorm import normalize

__all__ = [
    "BoxAnnotation",
    "Category",
    "DatasetStats",
    "LANGUAGES",
    "ManifestEntry",
    "ManifestError",
    "Polarity",
    "SPLITS",
    "compute_stats",
    "ground_truth_polarity",
    "parse_manifest",
    "serialize_manifest",
]

log = logging.getLogger(__name__)

Polarity = Literal["positive", "negative"]

LANGUAGES = ("vi", "en", "mixed")
SPLITS = ("train", "test")


class Category(str, Enum):
    """Ground-truth category of a dataset image."""

    NOT_MAP = "not_map"
    NOT_VIETNAM_MAP = "not_vietnam_map"
    WITH_ISLANDS = "vietnam_map_with_islands"
    WITHOUT_ISLANDS = "vietnam_map_without_islands"


class ManifestError(ValueError):
    """Raised on malformed manifests; message lists line-positional errors."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid manifest:\n" + "\n".join(f"  - {p}" for p in self.problems))


def _polygon_area(vertices: tuple[tuple[float, float], ...]) -> float:
    area = 0.0
    for i, (x1, y1) in enumerate(vertices):
        x2, y2 = vertices[(i + 1) % len(vertices)]
        area += x1 * y2 - x2 * y1
    return abs(area) / 2.0


@dataclass(frozen=True)
class BoxAnnotation:
    """One annotated landmark-name box on a map image."""

    polygon: tuple[tuple[float, float], ...]
    term_label: str

    def area(self) -> float:
        return _polygon_area(self.polygon)


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset image with its ground truth."""

    image_id: str
    path: str
    category: Category
    language: str
    split: str
    boxes: tuple[BoxAnnotation, ...] = ()

    def resolve_path(self, manifest_dir: Path | str) -> Path:
        return Path(manifest_dir) / self.path


@dataclass(frozen=True)
class DatasetStats:
    """Counts per (category, language, split) cell plus derived totals."""

    cells: dict[tuple[Category, str, str], int] = field(default_factory=dict)

    def count(self, category: Category, language: str | None = None, split: str | None = None) -> int:
        return sum(
            n
            for (cat, lang, spl), n in self.cells.items()
            if cat is category and language in (None, lang) and split in (None, spl)
        )

    def split_total(self, split: str) -> int:
        return sum(n for (_, _, spl), n in self.cells.items() if spl == split)

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def to_json(self) -> dict:
        rows = [
            {"category": cat.value, "language": lang, "split": spl, "count": n}
            for (cat, lang, spl), n in sorted(self.cells.items(), key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2]))
        ]
        return {
            "cells": rows,
            "split_totals": {spl: self.split_total(spl) for spl in SPLITS},
            "total": self.total,
        }


_NORMALIZED_TERMS = tuple(normalize(t) for t in DEFAULT_TERMS)


def _parse_polygon(raw: object, line_no: int, problems: list[str]) -> tuple[tuple[float, float], ...] | None:
    if not isinstance(raw, list) or len(raw) != 8 or not all(isinstance(v, (int, float)) for v in raw):
        problems.append(f"line {line_no}: field 'polygon' must be a flat array of 8 numbers")
        return None
    vertices = tuple((float(raw[i]), float(raw[i + 1])) for i in range(0, 8, 2))
    if _polygon_area(vertices) <= 0.0:
        problems.append(f"line {line_no}: field 'polygon' is degenerate (zero area)")
        return None
    return vertices


def _parse_entry(obj: dict, line_no: int, problems: list[str]) -> ManifestEntry | None:
    before = len(problems)

    image_id = obj.get("image_id")
    if not isinstance(image_id, str) or not image_id:
        problems.append(f"line {line_no}: field 'image_id' must be a non-empty string")
    path = obj.get("path")
    if not isinstance(path, str) or not path:
        problems.append(f"line {line_no}: field 'path' must be a non-empty string")

    category: Category | None = None
    raw_category = obj.get("category")
    try:
        category = Category(raw_category)
    except ValueError:
        problems.append(f"line {line_no}: field 'category' has unknown value {raw_category!r}")

    language = obj.get("language")
    if language not in LANGUAGES:
        problems.append(f"line {line_no}: field 'language' must be one of {LANGUAGES}, got {language!r}")
    split = obj.get("split")
    if split not in SPLITS:
        problems.append(f"line {line_no}: field 'split' must be one of {SPLITS}, got {split!r}")

    boxes: list[BoxAnnotation] = []
    raw_boxes = obj.get("boxes", [])
    if not isinstance(raw_boxes, list):
        problems.append(f"line {line_no}: field 'boxes' must be an array")
        raw_boxes = []
    for raw_box in raw_boxes:
        if not isinstance(raw_box, dict):
            problems.append(f"line {line_no}: field 'boxes' entries must be objects")
            continue
        polygon = _parse_polygon(raw_box.get("polygon"), line_no, problems)
        term_label = raw_box.get("term_label")
        if not isinstance(term_label, str):
            problems.append(f"line {line_no}: field 'term_label' must be a string")
            continue
        if normalize(term_label) not in _NORMALIZED_TERMS:
            problems.append(
                f"line {line_no}: field 'term_label' value {term_label!r} does not normalize to a known landmark term"
            )
            continue
        if polygon is not None:
            boxes.append(BoxAnnotation(polygon=polygon, term_label=term_label))

    if len(problems) > before:
        return None
    assert category is not None and isinstance(image_id, str) and isinstance(path, str)
    if boxes and category is not Category.WITH_ISLANDS:
        log.warning("line %d: entry %s has box annotations but category %s", line_no, image_id, category.value)
    return ManifestEntry(
        image_id=image_id,
        path=path,
        category=category,
        language=str(language),
        split=str(split),
        boxes=tuple(boxes),
    )


def parse_manifest(path: Path | str) -> list[ManifestEntry]:
    """Parse and validate a JSON-lines manifest.

    Strict: any malformed line, unknown token, bad polygon, or duplicate
    image_id raises :class:`ManifestError` naming every offending line
    and field.  Blank lines are ignored.
    """
    text = Path(path).read_text(encoding="utf-8")
    entries: list[ManifestEntry] = []
    problems: list[str] = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            problems.append(f"line {line_no}: not valid JSON ({exc.msg})")
            continue
        if not isinstance(obj, dict):
            problems.append(f"line {line_no}: entry must be a JSON object")
            continue
        entry = _parse_entry(obj, line_no, problems)
        if entry is None:
            continue
        if entry.image_id in seen:
            problems.append(
                f"line {line_no}: duplicate image_id {entry.image_id!r} (first seen on line {seen[entry.image_id]})"
            )
            continue
        seen[entry.image_id] = line_no
        entries.append(entry)
    if problems:
        raise ManifestError(problems)
    return entries


def entry_to_json(entry: ManifestEntry) -> dict:
    obj: dict = {
        "image_id": entry.image_id,
        "path": entry.path,
        "category": entry.category.value,
        "language": entry.language,
        "split": entry.split,
    }
    if entry.boxes:
        obj["boxes"] = [
            {"polygon": [v for vertex in box.polygon for v in vertex], "term_label": box.term_label}
            for box in entry.boxes
        ]
    return obj


def serialize_manifest(entries: Iterable[ManifestEntry], path: Path | str) -> None:
    """Write entries as JSON lines; inverse of :func:`parse_manifest`."""
    lines = [json.dumps(entry_to_json(e), ensure_ascii=False) for e in entries]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def compute_stats(entries: Iterable[ManifestEntry]) -> DatasetStats:
    """Exact cell counts per (category, language, split)."""
    counter: Counter[tuple[Category, str, str]] = Counter()
    for entry in entries:
        counter[(entry.category, entry.language, entry.split)] += 1
    return DatasetStats(cells=dict(counter))


def ground_truth_polarity(entry: ManifestEntry | Category) -> Polarity:
    """Positive iff the image is a Vietnam map without the island names."""
    category = entry.category if isinstance(entry, ManifestEntry) else entry
    return "positive" if category is Category.WITHOUT_ISLANDS else "negative"
