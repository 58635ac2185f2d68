"""Synthetic screening corpora with controllable recognition noise.

Generates a manifest plus pre-filled stage caches, so a full screening
run needs no image files and no models.  Landmark labels can be
perturbed by a configurable number of character edits; the distance
actually realized after normalization is recorded per instance, since
edits can cancel or fold away.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from mapscreen.dataset import (
    BoxAnnotation,
    Category,
    ManifestEntry,
    ground_truth_polarity,
    serialize_manifest,
)
from mapscreen.inference import (
    CLASSIFICATION_CACHE,
    DETECTION_CACHE,
    RECOGNITION_CACHE,
    RecognizedInstance,
    TextRegion,
    write_classification_cache,
    write_detection_cache,
    write_recognition_cache,
)
from mapscreen.matching import MatchPolicy, levenshtein, match_instance
from mapscreen.textnorm import normalize

__all__ = [
    "CategoryMix",
    "DECOY_TEXTS",
    "GeneratedCorpus",
    "ISLAND_DISPLAY",
    "MixCell",
    "NoiseSpec",
    "OPERATIONS",
    "default_mix",
    "generate_corpus",
    "perturb_string",
]

OPERATIONS = ("insert", "delete", "substitute", "diacritic")

# Display forms whose normalization equals a vocabulary term exactly.
ISLAND_DISPLAY = {
    "vi": ("Hoàng Sa", "Trường Sa"),
    "en": ("Paracel", "Spratly"),
    "mixed": ("Hoàng Sa", "Trường Sa", "Paracel", "Spratly"),
}

# Place-name texts for non-landmark boxes.  Every entry must stay at
# edit distance >= 3 from every vocabulary term (under token windows,
# which only lowers distances); generate_corpus enforces this so noise
# ablations cannot be polluted by accidental near-matches.
DECOY_TEXTS = (
    "Ha Noi",
    "Da Nang",
    "Hai Phong",
    "Can Tho",
    "Quy Nhon",
    "Nha Trang",
    "Bien Dong",
    "Mekong Delta",
)

_DECOY_GUARD = MatchPolicy(threshold=2, comparator="inclusive", granularity="token")

_ACCENT_VARIANTS = {
    "a": "àáảãạăâ",
    "e": "èéẻẽẹê",
    "i": "ìíỉĩị",
    "o": "òóỏõọôơ",
    "u": "ùúủũụư",
    "y": "ỳýỷỹỵ",
    "d": "đ",
}
_FOLD_BASE = {variant: base for base, variants in _ACCENT_VARIANTS.items() for variant in variants}
_INSERTABLE = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class NoiseSpec:
    """How many character edits to apply to each landmark label."""

    edits: int = 0
    operations: tuple[str, ...] = OPERATIONS
    seed: int = 0

    def __post_init__(self) -> None:
        if self.edits < 0:
            raise ValueError("edits must be >= 0")
        if not self.operations:
            raise ValueError("operations must not be empty")
        unknown = [op for op in self.operations if op not in OPERATIONS]
        if unknown:
            raise ValueError(f"unknown operations {unknown}; choose from {list(OPERATIONS)}")

    def rng_for(self, *parts: object) -> random.Random:
        """Deterministic per-entry stream, keyed by seed and entry path."""
        key = ":".join(str(p) for p in (self.seed, *parts))
        return random.Random(key)


def _apply_insert(text: str, rng: random.Random) -> str:
    pos = rng.randrange(len(text) + 1)
    return text[:pos] + rng.choice(_INSERTABLE) + text[pos:]


def _apply_delete(text: str, rng: random.Random) -> str:
    if not text:
        return text
    pos = rng.randrange(len(text))
    return text[:pos] + text[pos + 1 :]


def _apply_substitute(text: str, rng: random.Random) -> str:
    if not text:
        return text
    pos = rng.randrange(len(text))
    original = text[pos]
    replacement = rng.choice(_INSERTABLE)
    while replacement == original.lower():
        replacement = rng.choice(_INSERTABLE)
    return text[:pos] + replacement + text[pos + 1 :]


def _apply_diacritic(text: str, rng: random.Random) -> str:
    """Swap one letter between its base and an accented variant.

    Folds away under normalization, so the realized distance
    contribution is zero; falls back to substitution when the text has
    no eligible letter.
    """
    eligible = [
        i
        for i, ch in enumerate(text)
        if ch.lower() in _ACCENT_VARIANTS or ch.lower() in _FOLD_BASE
    ]
    if not eligible:
        return _apply_substitute(text, rng)
    pos = rng.choice(eligible)
    ch = text[pos]
    lower = ch.lower()
    if lower in _FOLD_BASE:
        swapped = _FOLD_BASE[lower]
    else:
        swapped = rng.choice(_ACCENT_VARIANTS[lower])
    if ch.isupper():
        swapped = swapped.upper()
    return text[:pos] + swapped + text[pos + 1 :]


_APPLY = {
    "insert": _apply_insert,
    "delete": _apply_delete,
    "substitute": _apply_substitute,
    "diacritic": _apply_diacritic,
}


def perturb_string(text: str, edits: int, operations: tuple[str, ...], rng: random.Random) -> str:
    """Apply ``edits`` random character operations drawn from ``operations``."""
    out = text
    for _ in range(edits):
        op = rng.choice(operations)
        out = _APPLY[op](out, rng)
    return out


def realized_distance(original: str, perturbed: str) -> int:
    """Edit distance between the normalized forms; what matching sees."""
    return levenshtein(normalize(original), normalize(perturbed))


@dataclass(frozen=True)
class MixCell:
    """Image count for one (category, language, split) combination."""

    category: Category
    language: str
    split: str
    count: int


@dataclass(frozen=True)
class CategoryMix:
    cells: tuple[MixCell, ...]

    @property
    def total(self) -> int:
        return sum(cell.count for cell in self.cells)

    def scaled(self, total: int) -> "CategoryMix":
        """Rescale to ``total`` images by largest-remainder apportionment.

        Floors the proportional quota of every cell, then hands the
        leftover images to the cells with the largest fractional parts
        (earlier cells win ties), so the cell counts always sum to
        ``total`` exactly.
        """
        if total < 0:
            raise ValueError("total must be >= 0")
        grand = self.total
        if grand == 0:
            raise ValueError("cannot scale an empty mix")
        quotas = [cell.count * total / grand for cell in self.cells]
        floors = [int(q) for q in quotas]
        leftover = total - sum(floors)
        order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i))
        for i in order[:leftover]:
            floors[i] += 1
        cells = tuple(
            MixCell(cell.category, cell.language, cell.split, count)
            for cell, count in zip(self.cells, floors)
        )
        return CategoryMix(cells=cells)


def default_mix() -> CategoryMix:
    """Composition of the reference screening corpus.

    Non-maps and non-Vietnam maps carry mixed-language text; island
    categories split between Vietnamese and English labels.
    """
    return CategoryMix(
        cells=(
            MixCell(Category.NOT_MAP, "mixed", "train", 1400),
            MixCell(Category.NOT_MAP, "mixed", "test", 600),
            MixCell(Category.NOT_VIETNAM_MAP, "mixed", "train", 1944),
            MixCell(Category.NOT_VIETNAM_MAP, "mixed", "test", 833),
            MixCell(Category.WITH_ISLANDS, "vi", "train", 606),
            MixCell(Category.WITH_ISLANDS, "vi", "test", 260),
            MixCell(Category.WITH_ISLANDS, "en", "train", 95),
            MixCell(Category.WITH_ISLANDS, "en", "test", 41),
            MixCell(Category.WITHOUT_ISLANDS, "vi", "train", 204),
            MixCell(Category.WITHOUT_ISLANDS, "vi", "test", 87),
            MixCell(Category.WITHOUT_ISLANDS, "en", "train", 552),
            MixCell(Category.WITHOUT_ISLANDS, "en", "test", 236),
        )
    )


@dataclass(frozen=True)
class InstanceRecord:
    """Bookkeeping for one synthesized text instance."""

    image_id: str
    kind: str  # "landmark" | "decoy"
    term_label: str | None
    display: str
    perturbed: str
    realized_distance: int


@dataclass(frozen=True)
class GeneratedCorpus:
    root: Path
    manifest_path: Path
    caches_dir: Path
    bookkeeping_path: Path
    ground_truth: dict[str, str]
    instances: tuple[InstanceRecord, ...]


def _island_region(index: int) -> TextRegion:
    y = 20.0 + 40.0 * index
    return TextRegion(
        polygon=((16.0, y), (156.0, y), (156.0, y + 26.0), (16.0, y + 26.0)),
        score=round(0.95 - 0.01 * index, 4),
    )


def _decoy_region(index: int) -> TextRegion:
    y = 300.0 + 40.0 * index
    return TextRegion(
        polygon=((24.0, y), (144.0, y), (144.0, y + 22.0), (24.0, y + 22.0)),
        score=round(0.80 - 0.01 * index, 4),
    )


def _check_decoys() -> None:
    bad = [t for t in DECOY_TEXTS if match_instance(t, _DECOY_GUARD).matched]
    if bad:
        raise ValueError(f"decoy texts too close to the vocabulary: {bad}")


def generate_corpus(
    out_dir: Path | str,
    mix: CategoryMix | None = None,
    total: int | None = None,
    noise: NoiseSpec | None = None,
    decoys_per_map: int = 2,
) -> GeneratedCorpus:
    """Write a manifest, stage caches, and bookkeeping under ``out_dir``.

    Repeated calls with the same arguments produce byte-identical
    files.  Landmark labels are perturbed per ``noise``; decoy texts are
    never perturbed, so they cannot drift toward the vocabulary.
    """
    _check_decoys()
    mix = mix or default_mix()
    if total is not None:
        if total < 1:
            raise ValueError("total must be >= 1")
        mix = mix.scaled(total)
    if mix.total < 1:
        raise ValueError("mix must cover at least one image")
    noise = noise or NoiseSpec()
    if decoys_per_map < 0:
        raise ValueError("decoys_per_map must be >= 0")

    root = Path(out_dir)
    caches = root / "caches"
    caches.mkdir(parents=True, exist_ok=True)

    entries: list[ManifestEntry] = []
    scores: dict[str, float] = {}
    regions: dict[str, list[TextRegion]] = {}
    recognized: dict[str, list[RecognizedInstance]] = {}
    ground_truth: dict[str, str] = {}
    instances: list[InstanceRecord] = []

    index = 0
    for cell in mix.cells:
        is_map = cell.category in (Category.WITH_ISLANDS, Category.WITHOUT_ISLANDS)
        displays = ISLAND_DISPLAY.get(cell.language, ISLAND_DISPLAY["mixed"])
        for _ in range(cell.count):
            image_id = f"img-{index:05d}"
            index += 1
            score_rng = noise.rng_for("score", image_id)
            if is_map:
                score = round(score_rng.uniform(0.85, 0.99), 4)
            else:
                score = round(score_rng.uniform(0.01, 0.15), 4)
            scores[image_id] = score
            ground_truth[image_id] = ground_truth_polarity(cell.category)

            boxes: list[BoxAnnotation] = []
            image_regions: list[TextRegion] = []
            image_instances: list[RecognizedInstance] = []
            if cell.category is Category.WITH_ISLANDS:
                for j, display in enumerate(displays):
                    region = _island_region(j)
                    rng = noise.rng_for("text", image_id, j)
                    perturbed = perturb_string(display, noise.edits, noise.operations, rng)
                    term = normalize(display)
                    boxes.append(BoxAnnotation(polygon=region.polygon, term_label=term))
                    image_regions.append(region)
                    image_instances.append(
                        RecognizedInstance(region=region, text=perturbed, confidence=0.9)
                    )
                    instances.append(
                        InstanceRecord(
                            image_id=image_id,
                            kind="landmark",
                            term_label=term,
                            display=display,
                            perturbed=perturbed,
                            realized_distance=realized_distance(display, perturbed),
                        )
                    )
            if is_map:
                for j in range(decoys_per_map):
                    region = _decoy_region(j)
                    rng = noise.rng_for("decoy", image_id, j)
                    text = DECOY_TEXTS[rng.randrange(len(DECOY_TEXTS))]
                    image_regions.append(region)
                    image_instances.append(
                        RecognizedInstance(region=region, text=text, confidence=0.85)
                    )
                    instances.append(
                        InstanceRecord(
                            image_id=image_id,
                            kind="decoy",
                            term_label=None,
                            display=text,
                            perturbed=text,
                            realized_distance=0,
                        )
                    )
            regions[image_id] = image_regions
            recognized[image_id] = image_instances

            entries.append(
                ManifestEntry(
                    image_id=image_id,
                    path=f"images/{image_id}.png",
                    category=cell.category,
                    language=cell.language,
                    split=cell.split,
                    boxes=tuple(boxes),
                )
            )

    manifest_path = root / "manifest.jsonl"
    serialize_manifest(entries, manifest_path)
    write_classification_cache(caches / CLASSIFICATION_CACHE, scores)
    write_detection_cache(caches / DETECTION_CACHE, regions)
    write_recognition_cache(caches / RECOGNITION_CACHE, recognized)

    bookkeeping_path = root / "bookkeeping.json"
    bookkeeping = {
        "seed": noise.seed,
        "edits": noise.edits,
        "operations": list(noise.operations),
        "total": mix.total,
        "decoys_per_map": decoys_per_map,
        "ground_truth": ground_truth,
        "instances": [
            {
                "image_id": r.image_id,
                "kind": r.kind,
                "term_label": r.term_label,
                "display": r.display,
                "perturbed": r.perturbed,
                "realized_distance": r.realized_distance,
            }
            for r in instances
        ],
    }
    bookkeeping_path.write_text(
        json.dumps(bookkeeping, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
        encoding="utf-8",
    )

    return GeneratedCorpus(
        root=root,
        manifest_path=manifest_path,
        caches_dir=caches,
        bookkeeping_path=bookkeeping_path,
        ground_truth=ground_truth,
        instances=tuple(instances),
    )
