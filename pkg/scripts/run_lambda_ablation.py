#!/usr/bin/env python3
"""Distance-threshold ablation on a corpus with one character deleted.

Every landmark label is perturbed by exactly one deletion, which always
realizes edit distance 1 after normalization.  Sweeping the threshold
re-decides the stored verdicts without touching any backend: at 1
(strict) nothing matches and recall collapses, from 2 upward everything
matches again.
"""

from __future__ import annotations

import argparse
import tempfile
from pathlib import Path

from mapscreen.dataset import parse_manifest
from mapscreen.evaluation import lambda_sweep, render_sweep_table
from mapscreen.inference import BackendDescriptor
from mapscreen.noise import NoiseSpec, generate_corpus
from mapscreen.pipeline import PipelineConfig, items_from_manifest, screen_batch


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--total", type=int, default=400, help="corpus size")
    parser.add_argument("--seed", type=int, default=11)
    parser.add_argument("--lambdas", default="1,2,5", help="comma-separated thresholds")
    args = parser.parse_args()

    thresholds = [int(p) for p in args.lambdas.split(",") if p.strip()]
    noise = NoiseSpec(edits=1, operations=("delete",), seed=args.seed)

    with tempfile.TemporaryDirectory() as scratch:
        corpus = generate_corpus(Path(scratch) / "corpus", total=args.total, noise=noise)
        realized = {r.realized_distance for r in corpus.instances if r.kind == "landmark"}
        print(f"realized landmark distances: {sorted(realized)}")

        cached = lambda: BackendDescriptor(kind="cached", identifier=str(corpus.caches_dir))
        config = PipelineConfig(classifier=cached(), detector=cached(), recognizer=cached())
        items = items_from_manifest(parse_manifest(corpus.manifest_path))
        verdicts, _ = screen_batch(items, config)

        rows = lambda_sweep(verdicts, corpus.ground_truth, thresholds)
        print(render_sweep_table(rows))
        return 0


if __name__ == "__main__":
    raise SystemExit(main())
