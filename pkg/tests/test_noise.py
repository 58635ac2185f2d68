"""Synthetic corpus generation: perturbations, apportionment, determinism."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapscreen.dataset import Category, parse_manifest
from mapscreen.inference import (
    CLASSIFICATION_CACHE,
    DETECTION_CACHE,
    RECOGNITION_CACHE,
    CachedClassifier,
    CachedDetector,
    CachedRecognizer,
)
from mapscreen.matching import DEFAULT_TERMS, levenshtein
from mapscreen.noise import (
    DECOY_TEXTS,
    ISLAND_DISPLAY,
    CategoryMix,
    MixCell,
    NoiseSpec,
    default_mix,
    generate_corpus,
    perturb_string,
    realized_distance,
)
from mapscreen.textnorm import normalize

ALL_DISPLAYS = ISLAND_DISPLAY["mixed"]


def test_zero_edits_is_identity():
    rng = random.Random(0)
    for display in ALL_DISPLAYS:
        assert perturb_string(display, 0, ("insert",), rng) == display


@given(
    display=st.sampled_from(ALL_DISPLAYS),
    edits=st.integers(0, 3),
    seed=st.integers(0, 999),
)
def test_realized_distance_never_exceeds_edit_count(display, edits, seed):
    perturbed = perturb_string(display, edits, NoiseSpec().operations, random.Random(seed))
    assert realized_distance(display, perturbed) <= edits


def test_every_single_deletion_realizes_distance_one():
    # the display forms have no redundancy a deletion could hide in
    for display in ALL_DISPLAYS:
        for pos in range(len(display)):
            deleted = display[:pos] + display[pos + 1 :]
            assert realized_distance(display, deleted) == 1, (display, pos)


@given(edits=st.integers(1, 3), seed=st.integers(0, 99), display=st.sampled_from(ALL_DISPLAYS))
def test_diacritic_edits_fold_away(display, edits, seed):
    perturbed = perturb_string(display, edits, ("diacritic",), random.Random(seed))
    assert realized_distance(display, perturbed) == 0


def test_decoys_stay_far_from_vocabulary():
    for decoy in DECOY_TEXTS:
        tokens = normalize(decoy).split(" ")
        windows = tokens + [" ".join(tokens[i : i + 2]) for i in range(len(tokens) - 1)]
        best = min(levenshtein(w, t) for w in windows for t in DEFAULT_TERMS)
        assert best >= 3, decoy


def test_rng_streams_keyed_by_parts():
    spec = NoiseSpec(seed=11)
    a = [spec.rng_for("text", "img-1", 0).random() for _ in range(3)]
    b = [spec.rng_for("text", "img-1", 0).random() for _ in range(3)]
    c = [spec.rng_for("text", "img-2", 0).random() for _ in range(3)]
    assert a == b
    assert a != c
    assert a != [NoiseSpec(seed=12).rng_for("text", "img-1", 0).random() for _ in range(3)]


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(edits=-1)
    with pytest.raises(ValueError):
        NoiseSpec(operations=())
    with pytest.raises(ValueError, match="unknown operations"):
        NoiseSpec(operations=("insert", "transpose"))


@settings(max_examples=30)
@given(total=st.integers(1, 5000))
def test_scaled_mix_sums_exactly(total):
    scaled = default_mix().scaled(total)
    assert scaled.total == total
    grand = default_mix().total
    for before, after in zip(default_mix().cells, scaled.cells):
        quota = before.count * total / grand
        assert abs(after.count - quota) < 1.0


def test_scaling_to_own_total_is_identity():
    mix = default_mix()
    assert mix.scaled(mix.total) == mix


def test_scaled_tie_goes_to_earlier_cell():
    mix = CategoryMix(
        cells=(
            MixCell(Category.NOT_MAP, "mixed", "train", 1),
            MixCell(Category.NOT_MAP, "mixed", "test", 1),
        )
    )
    scaled = mix.scaled(3)
    assert [c.count for c in scaled.cells] == [2, 1]


def test_generate_corpus_rejects_bad_arguments(tmp_path):
    with pytest.raises(ValueError):
        generate_corpus(tmp_path, total=0)
    with pytest.raises(ValueError):
        generate_corpus(tmp_path, decoys_per_map=-1)


def test_generated_corpus_is_byte_reproducible(tmp_path):
    kwargs = dict(total=30, noise=NoiseSpec(edits=1, seed=7))
    first = generate_corpus(tmp_path / "a", **kwargs)
    second = generate_corpus(tmp_path / "b", **kwargs)
    for name in ("manifest.jsonl", "bookkeeping.json"):
        assert (first.root / name).read_bytes() == (second.root / name).read_bytes()
    for name in (CLASSIFICATION_CACHE, DETECTION_CACHE, RECOGNITION_CACHE):
        assert (first.caches_dir / name).read_bytes() == (second.caches_dir / name).read_bytes()


def test_caches_cover_every_manifest_entry(clean_corpus):
    entries = parse_manifest(clean_corpus.manifest_path)
    classifier = CachedClassifier(clean_corpus.caches_dir)
    detector = CachedDetector(clean_corpus.caches_dir)
    recognizer = CachedRecognizer(clean_corpus.caches_dir)
    from mapscreen.inference import ImageHandle

    for entry in entries:
        handle = ImageHandle(entry.image_id)
        output = classifier.classify(handle)
        regions = detector.detect(handle)
        for region in regions:
            recognizer.recognize(handle, region)
        is_map = entry.category in (Category.WITH_ISLANDS, Category.WITHOUT_ISLANDS)
        assert output.is_vietnam_map == is_map


def test_manifest_boxes_only_on_island_maps(clean_corpus):
    entries = parse_manifest(clean_corpus.manifest_path)
    by_category = {}
    for entry in entries:
        by_category.setdefault(entry.category, []).append(entry)
    for entry in by_category.get(Category.WITH_ISLANDS, []):
        assert entry.boxes, entry.image_id
        for box in entry.boxes:
            assert box.term_label in DEFAULT_TERMS
    for category in (Category.NOT_MAP, Category.NOT_VIETNAM_MAP, Category.WITHOUT_ISLANDS):
        for entry in by_category.get(category, []):
            assert entry.boxes == ()


def test_ground_truth_follows_category_polarity(clean_corpus):
    entries = parse_manifest(clean_corpus.manifest_path)
    positives = {e.image_id for e in entries if e.category is Category.WITHOUT_ISLANDS}
    for image_id, truth in clean_corpus.ground_truth.items():
        assert truth == ("positive" if image_id in positives else "negative")


def test_clean_corpus_screens_back_to_truth(clean_corpus):
    from mapscreen.evaluation import build_report, confusion_from_verdicts
    from mapscreen.inference import BackendDescriptor
    from mapscreen.pipeline import PipelineConfig, items_from_manifest, screen_batch

    items = items_from_manifest(parse_manifest(clean_corpus.manifest_path))
    cached = BackendDescriptor(kind="cached", identifier=str(clean_corpus.caches_dir))
    config = PipelineConfig(classifier=cached, detector=cached, recognizer=cached)
    verdicts, _ = screen_batch(items, config)
    report = build_report(confusion_from_verdicts(verdicts, clean_corpus.ground_truth))
    assert report.precision == 1.0
    assert report.recall == 1.0
    assert report.f1 == 1.0


def test_noisy_corpus_records_realized_distances(tmp_path):
    corpus = generate_corpus(tmp_path, total=24, noise=NoiseSpec(edits=1, seed=5, operations=("delete",)))
    landmark = [r for r in corpus.instances if r.kind == "landmark"]
    assert landmark
    assert all(r.realized_distance == 1 for r in landmark)
    decoys = [r for r in corpus.instances if r.kind == "decoy"]
    assert all(r.display == r.perturbed for r in decoys)
