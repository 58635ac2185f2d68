#!/usr/bin/env python3
"""End-to-end screening run on a clean synthetic corpus.

Generates a noise-free corpus, screens it from the prediction caches,
and evaluates against the generated ground truth.  With zero edits every
landmark label survives normalization exactly, so every metric should
come out at 100%.
"""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

from mapscreen.evaluation import build_report, confusion_from_verdicts
from mapscreen.inference import BackendDescriptor
from mapscreen.noise import NoiseSpec, generate_corpus
from mapscreen.pipeline import PipelineConfig, items_from_manifest, screen_batch, write_verdicts
from mapscreen.dataset import parse_manifest


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--total", type=int, default=400, help="corpus size")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--jobs", type=int, default=4)
    parser.add_argument("--keep", default=None, help="keep the corpus in this directory")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as scratch:
        out_dir = Path(args.keep) if args.keep else Path(scratch) / "corpus"
        corpus = generate_corpus(out_dir, total=args.total, noise=NoiseSpec(edits=0, seed=args.seed))
        print(f"corpus: {corpus.root} ({args.total} images)")

        cached = lambda: BackendDescriptor(kind="cached", identifier=str(corpus.caches_dir))
        config = PipelineConfig(
            classifier=cached(), detector=cached(), recognizer=cached(), parallelism=args.jobs
        )
        entries = parse_manifest(corpus.manifest_path)
        items = items_from_manifest(entries)
        verdicts, summary = screen_batch(items, config)
        report_path = corpus.root / "verdicts.jsonl"
        write_verdicts(report_path, verdicts, summary)
        print(f"verdicts: {report_path}")
        for reason, n in summary.to_json()["counts"].items():
            print(f"  {reason}: {n}")

        counts = confusion_from_verdicts(verdicts, corpus.ground_truth)
        report = build_report(counts)
        obj = report.to_json()
        print(f"precision {obj['precision_pct']:.2f}  recall {obj['recall_pct']:.2f}  f1 {obj['f1_pct']:.2f}")
        return 0 if report.f1 == 1.0 else 1


if __name__ == "__main__":
    raise SystemExit(main())
