"""Command line entry point.

Subcommands: screen (run the pipeline over a manifest), evaluate
(metrics from a verdict report), sweep (re-decide at several distance
thresholds), stats (manifest composition), gen-corpus (synthetic
corpus).  Exit codes: 0 success, 1 bad usage or config, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from mapscreen.config import (
    BACKEND_CHOICES,
    ConfigError,
    build_pipeline_config,
    build_policy,
    load_config_file,
    merge_settings,
)
from mapscreen.dataset import (
    SPLITS,
    ManifestError,
    compute_stats,
    ground_truth_polarity,
    parse_manifest,
)
from mapscreen.evaluation import (
    ConfusionCounts,
    EvaluationError,
    RankedPrediction,
    average_precision,
    build_report,
    confusion_from_verdicts,
    f1,
    lambda_sweep,
    ranking_score,
    render_sweep_table,
)
from mapscreen.inference import BackendError
from mapscreen.noise import NoiseSpec, default_mix, generate_corpus
from mapscreen.pipeline import (
    build_backends,
    items_from_manifest,
    read_verdicts,
    screen_batch,
    write_verdicts,
)

__all__ = ["main"]


class _UsageError(Exception):
    """Command line misuse; printed to stderr, exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract here is 1
    def error(self, message: str) -> "None":  # type: ignore[override]
        raise _UsageError(f"{self.prog}: {message}")


def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lambda_", type=int, default=None, metavar="N",
                   help="edit distance threshold")
    p.add_argument("--comparator", choices=("strict", "inclusive"), default=None,
                   help="how the threshold bounds the distance")
    p.add_argument("--granularity", choices=("instance", "token"), default=None,
                   help="match whole instances or 1-2 token windows")
    p.add_argument("--terms", default=None, metavar="T1,T2,...",
                   help="comma-separated vocabulary override")


def _policy_overrides(args: argparse.Namespace) -> dict:
    terms = None
    if args.terms is not None:
        terms = [t.strip() for t in args.terms.split(",") if t.strip()]
        if not terms:
            raise ConfigError("--terms must name at least one term")
    return {
        "lambda": args.lambda_,
        "comparator": args.comparator,
        "granularity": args.granularity,
        "terms": terms,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapscreen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("screen", help="screen a manifest of images")
    p.add_argument("--manifest", required=True, help="JSON-lines manifest to screen")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--backend", choices=BACKEND_CHOICES, default=None)
    p.add_argument("--backend-path", default=None, help="cache dir or model bundle dir")
    p.add_argument("--classifier-threshold", type=float, default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker threads")
    p.add_argument("--split", choices=SPLITS + ("all",), default="all")
    p.add_argument("--out", required=True, help="verdict report to write")
    _add_policy_flags(p)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("evaluate", help="metrics from a verdict report")
    p.add_argument("--report", default=None, help="verdict report from 'screen'")
    p.add_argument("--truth", default=None, help="ground truth JSON (bookkeeping or flat mapping)")
    p.add_argument("--manifest", default=None, help="derive ground truth from a manifest")
    p.add_argument("--counts", default=None, metavar="TP,FP,FN,TN",
                   help="skip the report and score these confusion counts")
    p.add_argument("--pr", default=None, metavar="P,R",
                   help="skip the report and combine this precision/recall pair")
    p.add_argument("--setting", choices=("ENG", "VN", "ENG-VN"), default="ENG-VN",
                   help="language slice; ENG/VN need --manifest ground truth")
    p.add_argument("--ap", action="store_true", help="also compute average precision")
    p.add_argument("--out", default=None, help="write metrics JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="re-decide a report at several thresholds")
    p.add_argument("--report", required=True)
    p.add_argument("--truth", default=None)
    p.add_argument("--manifest", default=None)
    p.add_argument("--lambdas", required=True, metavar="N1,N2,...",
                   help="comma-separated thresholds to sweep")
    p.add_argument("--out", default=None, help="write sweep rows JSON here")
    _add_policy_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("stats", help="manifest composition table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-corpus", help="synthesize a manifest plus caches")
    p.add_argument("--out", required=True, help="corpus directory to create")
    p.add_argument("--total", type=int, default=None, help="rescale the default mix to this many images")
    p.add_argument("--edits", type=int, default=0, help="character edits per landmark label")
    p.add_argument("--operations", default=None, metavar="OP1,OP2,...",
                   help="subset of insert,delete,substitute,diacritic")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--decoys", type=int, default=2, help="decoy text boxes per map image")
    p.set_defaults(func=cmd_gen_corpus)

    return parser


def _build_settings(args: argparse.Namespace) -> dict:
    file_settings = load_config_file(args.config) if args.config else None
    overrides = _policy_overrides(args)
    overrides.update(
        {
            "backend": args.backend,
            "backend_path": args.backend_path,
            "classifier_threshold": args.classifier_threshold,
            "parallelism": args.jobs,
        }
    )
    return merge_settings(file_settings, overrides)


def cmd_screen(args: argparse.Namespace) -> int:
    config = build_pipeline_config(_build_settings(args))
    entries = parse_manifest(args.manifest)
    if args.split != "all":
        entries = [e for e in entries if e.split == args.split]
    items = items_from_manifest(entries, Path(args.manifest).parent)
    verdicts, summary = screen_batch(items, config, build_backends(config))
    write_verdicts(args.out, verdicts, summary)
    counts = summary.to_json()["counts"]
    print(f"screened {summary.total} images -> {args.out}")
    for reason, n in counts.items():
        print(f"  {reason}: {n}")
    return 0


def _load_truth(args: argparse.Namespace) -> tuple[dict[str, str], dict[str, str] | None]:
    """Ground truth mapping plus per-image languages when known."""
    if args.truth:
        obj = json.loads(Path(args.truth).read_text(encoding="utf-8"))
        mapping = obj.get("ground_truth", obj) if isinstance(obj, dict) else None
        if not isinstance(mapping, dict):
            raise ConfigError(f"truth file {args.truth} must hold a JSON object")
        bad = {k: v for k, v in mapping.items() if v not in ("positive", "negative")}
        if bad:
            raise ConfigError(f"truth values must be 'positive' or 'negative': {bad}")
        return dict(mapping), None
    if args.manifest:
        entries = parse_manifest(args.manifest)
        truth = {e.image_id: ground_truth_polarity(e) for e in entries}
        return truth, {e.image_id: e.language for e in entries}
    raise ConfigError("need --truth or --manifest for ground truth")


_SETTING_LANGUAGE = {"ENG": "en", "VN": "vi"}


def _apply_setting(setting, truth, languages, verdicts):
    """Restrict evaluation to one manifest language slice."""
    if setting == "ENG-VN":
        return truth, verdicts
    if languages is None:
        raise ConfigError(f"--setting {setting} needs --manifest ground truth")
    wanted = _SETTING_LANGUAGE[setting]
    kept = {image_id: polarity for image_id, polarity in truth.items() if languages[image_id] == wanted}
    return kept, [v for v in verdicts if v.image_id in kept]


def _parse_counts(spec: str) -> ConfusionCounts:
    parts = [p.strip() for p in spec.split(",")]
    if len(parts) != 4:
        raise ConfigError("--counts wants four integers: tp,fp,fn,tn")
    try:
        tp, fp, fn, tn = (int(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"--counts wants integers: {exc}") from exc
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _print_report(report) -> None:
    obj = report.to_json()
    print(f"setting    {obj['setting']}")
    print(f"counts     tp={report.counts.tp} fp={report.counts.fp} fn={report.counts.fn} tn={report.counts.tn}")
    print(f"precision  {obj['precision_pct']:.2f}")
    print(f"recall     {obj['recall_pct']:.2f}")
    print(f"f1         {obj['f1_pct']:.2f}")
    if "ap_pct" in obj:
        print(f"ap         {obj['ap_pct']:.2f}")
    if report.degenerate:
        print(f"degenerate {','.join(report.degenerate)}")


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.pr is not None:
        parts = [p.strip() for p in args.pr.split(",")]
        try:
            p_val, r_val = (float(x) for x in parts)
        except ValueError as exc:
            raise ConfigError(f"--pr wants two numbers: {exc}") from exc
        # harmonic mean is scale-free, so percentage inputs work directly
        print(f"f1         {f1(p_val, r_val):.2f}")
        return 0
    if args.counts is not None:
        report = build_report(_parse_counts(args.counts), setting=args.setting)
    else:
        if not args.report:
            raise ConfigError("need --report (or --counts)")
        verdicts, _ = read_verdicts(args.report)
        truth, languages = _load_truth(args)
        truth, verdicts = _apply_setting(args.setting, truth, languages, verdicts)
        counts = confusion_from_verdicts(verdicts, truth)
        ap = None
        metadata: dict = {}
        if args.ap:
            predictions = [
                RankedPrediction(image_id=v.image_id, score=ranking_score(v), ground_truth=truth[v.image_id])
                for v in verdicts
            ]
            ap = average_precision(predictions)
            metadata["ap_ranking"] = (
                "positive verdicts above negatives; within each group by classifier score"
            )
        report = build_report(counts, ap=ap, setting=args.setting, **metadata)
    _print_report(report)
    if args.out:
        Path(args.out).write_text(
            json.dumps(report.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        thresholds = [int(p.strip()) for p in args.lambdas.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigError(f"--lambdas wants integers: {exc}") from exc
    if not thresholds:
        raise ConfigError("--lambdas must name at least one threshold")
    overrides = _policy_overrides(args)
    overrides.pop("lambda", None)
    base_policy = build_policy({k: v for k, v in overrides.items() if v is not None})
    verdicts, _ = read_verdicts(args.report)
    truth, _languages = _load_truth(args)
    rows = lambda_sweep(verdicts, truth, thresholds, base_policy=base_policy)
    print(render_sweep_table(rows))
    if args.out:
        payload = [
            {"lambda": r.threshold, "matched_instances": r.matched_instances, **r.report.to_json()}
            for r in rows
        ]
        Path(args.out).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    stats = compute_stats(parse_manifest(args.manifest))
    if args.json:
        print(json.dumps(stats.to_json(), indent=2, ensure_ascii=False))
        return 0
    rows = stats.to_json()["cells"]
    widths = (28, 8, 7, 7, 7)
    print("category".ljust(widths[0]) + "language".ljust(widths[1])
          + "train".rjust(widths[2]) + "test".rjust(widths[3]) + "total".rjust(widths[4]))
    merged: dict[tuple[str, str], dict[str, int]] = {}
    for row in rows:
        merged.setdefault((row["category"], row["language"]), {})[row["split"]] = row["count"]
    for (category, language), by_split in merged.items():
        train = by_split.get("train", 0)
        test = by_split.get("test", 0)
        print(category.ljust(widths[0]) + language.ljust(widths[1])
              + str(train).rjust(widths[2]) + str(test).rjust(widths[3])
              + str(train + test).rjust(widths[4]))
    print("total".ljust(widths[0]) + "".ljust(widths[1])
          + str(stats.split_total("train")).rjust(widths[2])
          + str(stats.split_total("test")).rjust(widths[3])
          + str(stats.total).rjust(widths[4]))
    return 0


def cmd_gen_corpus(args: argparse.Namespace) -> int:
    operations = None
    if args.operations is not None:
        operations = tuple(op.strip() for op in args.operations.split(",") if op.strip())
    try:
        noise = NoiseSpec(
            edits=args.edits,
            operations=operations or NoiseSpec().operations,
            seed=args.seed,
        )
        corpus = generate_corpus(
            args.out,
            mix=default_mix(),
            total=args.total,
            noise=noise,
            decoys_per_map=args.decoys,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(f"manifest     {corpus.manifest_path}")
    print(f"caches       {corpus.caches_dir}")
    print(f"bookkeeping  {corpus.bookkeeping_path}")
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ManifestError, EvaluationError, BackendError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
