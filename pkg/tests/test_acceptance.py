"""Acceptance checks for the screening engine.

Each test is one acceptance criterion; the conftest hook prints a
PASS/FAIL line per criterion when the suite runs.  Tolerances are pinned
here and nowhere else.
"""

import functools
import itertools

import pytest

from mapscreen.dataset import (
    Category,
    ManifestEntry,
    compute_stats,
    parse_manifest,
    serialize_manifest,
)
from mapscreen.evaluation import (
    RankedPrediction,
    average_precision,
    build_report,
    confusion_from_verdicts,
    f1,
    lambda_sweep,
)
from mapscreen.inference import BackendDescriptor
from mapscreen.matching import (
    MatchPolicy,
    levenshtein,
    levenshtein_bounded,
    match_any,
    match_instance,
)
from mapscreen.noise import NoiseSpec, default_mix, generate_corpus
from mapscreen.pipeline import (
    LABEL_NEGATIVE,
    LABEL_POSITIVE,
    REASON_CONTAINS_LANDMARK,
    REASON_EXCLUDES_LANDMARKS,
    REASON_NOT_VIETNAM_MAP,
    PipelineConfig,
    decide,
    items_from_manifest,
    screen_batch,
    write_verdicts,
)

# --- criterion 1: reference F1 values from precision/recall pairs ----------

F1_REFERENCE_PAIRS = [
    (78.51, 93.87, 85.51),
    (93.12, 95.91, 94.49),
    (65.53, 91.28, 76.29),
    (39.25, 53.84, 45.40),
]


def test_f1_reference_pairs():
    for p, r, expected in F1_REFERENCE_PAIRS:
        assert f1(p, r) == pytest.approx(expected, abs=0.01), (p, r)


# --- criterion 2: vocabulary matcher reference cases -----------------------


def test_matcher_reference_cases():
    strict2 = MatchPolicy(threshold=2, comparator="strict")
    strict1 = MatchPolicy(threshold=1, comparator="strict")
    inclusive2 = MatchPolicy(threshold=2, comparator="inclusive")

    for text, term in [("Trung Sa", "truong sa"), ("Hoag Sa", "hoang sa"), ("Spatly", "spratly")]:
        result = match_instance(text, strict2)
        assert result.matched and result.term == term and result.distance == 1, text
        assert not match_instance(text, strict1).matched, text

    assert not match_instance("Ha Noi", strict2).matched
    assert not match_instance("Parcl", strict2).matched
    parcl = match_instance("Parcl", inclusive2)
    assert parcl.matched and parcl.term == "paracel" and parcl.distance == 2


# --- criterion 3: edit distance against an independent oracle --------------


@functools.lru_cache(maxsize=None)
def _oracle(a: str, b: str) -> int:
    if not a:
        return len(b)
    if not b:
        return len(a)
    cost = 0 if a[0] == b[0] else 1
    return min(_oracle(a[1:], b) + 1, _oracle(a, b[1:]) + 1, _oracle(a[1:], b[1:]) + cost)


def test_edit_distance_oracle_sweep():
    alphabet = "abc "
    by_length = {
        length: ["".join(p) for p in itertools.product(alphabet, repeat=length)]
        for length in range(7)
    }
    pairs = 0
    for la in range(7):
        for lb in range(7 - la):
            for a in by_length[la]:
                for b in by_length[lb]:
                    pairs += 1
                    expected = _oracle(a, b)
                    assert levenshtein(a, b) == expected, (a, b)
                    for bound in range(4):
                        got = levenshtein_bounded(a, b, bound)
                        want = expected if expected <= bound else None
                        assert got == want, (a, b, bound)
    assert pairs == 36409


# --- criterion 4: decision rule truth table --------------------------------


def test_decision_rule_truth_table():
    matched = match_any(["Hoag Sa"], MatchPolicy())
    unmatched = match_any(["Da Lat"], MatchPolicy())
    assert matched.any_matched and not unmatched.any_matched
    table = {
        (False, False): (LABEL_NEGATIVE, REASON_NOT_VIETNAM_MAP),
        (False, True): (LABEL_NEGATIVE, REASON_NOT_VIETNAM_MAP),
        (True, True): (LABEL_NEGATIVE, REASON_CONTAINS_LANDMARK),
        (True, False): (LABEL_POSITIVE, REASON_EXCLUDES_LANDMARKS),
    }
    for (is_map, has_match), expected in table.items():
        outcome = matched if has_match else unmatched
        assert decide(is_map, outcome) == expected, (is_map, has_match)


# --- criterion 5: clean corpus end to end ----------------------------------


def _cached_config(corpus, parallelism=1):
    cached = BackendDescriptor(kind="cached", identifier=str(corpus.caches_dir))
    return PipelineConfig(
        classifier=cached, detector=cached, recognizer=cached, parallelism=parallelism
    )


def test_clean_corpus_end_to_end(tmp_path):
    corpus = generate_corpus(tmp_path / "corpus", total=240, noise=NoiseSpec(edits=0, seed=1))
    entries = parse_manifest(corpus.manifest_path)
    assert len(entries) >= 200
    items = items_from_manifest(entries)

    serial = screen_batch(items, _cached_config(corpus, parallelism=1))
    parallel = screen_batch(items, _cached_config(corpus, parallelism=8))

    report = build_report(confusion_from_verdicts(serial[0], corpus.ground_truth))
    assert report.precision == 1.0
    assert report.recall == 1.0
    assert report.f1 == 1.0

    serial_path = tmp_path / "serial.jsonl"
    parallel_path = tmp_path / "parallel.jsonl"
    write_verdicts(serial_path, *serial)
    write_verdicts(parallel_path, *parallel)
    assert serial_path.read_bytes() == parallel_path.read_bytes()


# --- criterion 6: noisy corpus across distance thresholds ------------------


def test_noise_ablation_thresholds(tmp_path):
    corpus = generate_corpus(
        tmp_path / "noisy",
        total=60,
        noise=NoiseSpec(edits=1, seed=2, operations=("delete",)),
    )
    entries = parse_manifest(corpus.manifest_path)
    island_ids = [e.image_id for e in entries if e.category is Category.WITH_ISLANDS]
    assert island_ids

    verdicts, _ = screen_batch(items_from_manifest(entries), _cached_config(corpus))
    rows = lambda_sweep(verdicts, corpus.ground_truth, [1, 2, 5])
    by_threshold = {row.threshold: row for row in rows}

    def contains_recall(row):
        found = sum(1 for i in island_ids if row.reasons[i] == REASON_CONTAINS_LANDMARK)
        return found / len(island_ids)

    assert contains_recall(by_threshold[2]) == 1.0
    assert contains_recall(by_threshold[1]) < 1.0

    matched = [by_threshold[t].matched_instances for t in (1, 2, 5)]
    assert matched == sorted(matched)


# --- criterion 7: average precision against a brute-force oracle -----------


def _brute_ap(labels):
    positives = [i for i, label in enumerate(labels, start=1) if label == "positive"]
    return sum(
        sum(1 for j in positives if j <= rank) / rank for rank in positives
    ) / len(positives)


def test_average_precision_oracle():
    checked = 0
    for n in range(1, 7):
        for labels in itertools.product(("positive", "negative"), repeat=n):
            if "positive" not in labels:
                continue
            predictions = [
                RankedPrediction(image_id=f"img-{i:02d}", score=1.0 - i / 10, ground_truth=label)
                for i, label in enumerate(labels)
            ]
            assert average_precision(predictions) == pytest.approx(_brute_ap(labels), abs=1e-12)
            checked += 1
            if all(
                labels[i] == "positive" for i in range(labels.count("positive"))
            ):  # every positive ranked first
                assert average_precision(predictions) == 1.0
    assert checked == 120


# --- criterion 8: reference corpus composition -----------------------------


def test_reference_composition_stats(tmp_path):
    entries = []
    index = 0
    for cell in default_mix().cells:
        for _ in range(cell.count):
            entries.append(
                ManifestEntry(
                    image_id=f"img-{index:05d}",
                    path=f"images/img-{index:05d}.png",
                    category=cell.category,
                    language=cell.language,
                    split=cell.split,
                )
            )
            index += 1

    manifest_path = tmp_path / "manifest.jsonl"
    serialize_manifest(entries, manifest_path)
    stats = compute_stats(parse_manifest(manifest_path))

    assert stats.total == 6858
    assert stats.split_total("train") == 4801
    assert stats.split_total("test") == 2057

    by_category_split = {}
    for (category, _language, split), count in stats.cells.items():
        key = (category, split)
        by_category_split[key] = by_category_split.get(key, 0) + count

    expected = {
        (Category.NOT_MAP, "train"): 1400,
        (Category.NOT_MAP, "test"): 600,
        (Category.NOT_VIETNAM_MAP, "train"): 1944,
        (Category.NOT_VIETNAM_MAP, "test"): 833,
        (Category.WITH_ISLANDS, "train"): 701,
        (Category.WITH_ISLANDS, "test"): 301,
        (Category.WITHOUT_ISLANDS, "train"): 756,
        (Category.WITHOUT_ISLANDS, "test"): 323,
    }
    assert by_category_split == expected
