"""Command line entry points for the training loops.

Both commands run on synthetic data unless pointed at a dataset
builder of your own, which keeps them usable as smoke checks on a
fresh checkout.
"""

from __future__ import annotations

import argparse
import sys

from . import data
from .export import BundleBuilder
from .finetune_detector import DetectorStage, finetune_detector
from .recipes import STAGE_ORDER, ClassifierRecipe, DetectorRecipe
from .train_classifier import train_classifier


def _classifier_command(args) -> int:
    recipe = ClassifierRecipe(
        epochs=args.epochs,
        batch_size=args.batch_size,
        input_size=(args.size, args.size),
    )
    dataset = data.synthetic_classification(args.samples, size=args.size, seed=args.seed)
    outcome = train_classifier(dataset, recipe, max_batches=args.max_batches, seed=args.seed)
    print(f"classifier: {len(outcome.losses)} steps, final loss {outcome.losses[-1]:.4f}")
    if args.out:
        builder = BundleBuilder()
        builder.add_classifier(outcome.model, recipe)
        print(f"bundle: {builder.write(args.out)}")
    return 0


def _detector_command(args) -> int:
    recipe = DetectorRecipe(
        batch_size=args.batch_size,
        epochs_per_stage=args.epochs,
        input_size=(args.size, args.size),
    )
    stages = [
        DetectorStage(name, data.synthetic_detection(args.samples, size=args.size, seed=args.seed + i))
        for i, name in enumerate(STAGE_ORDER)
    ]
    outcome = finetune_detector(stages, recipe, max_steps_per_stage=args.max_steps, seed=args.seed)
    for name in outcome.provenance:
        losses = outcome.stage_losses[name]
        print(f"{name}: {len(losses)} steps, final loss {losses[-1]:.4f}")
    if args.out:
        builder = BundleBuilder()
        builder.add_detector(outcome.model, recipe, provenance=outcome.provenance)
        print(f"bundle: {builder.write(args.out)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maptrain")
    sub = parser.add_subparsers(dest="command", required=True)

    classify = sub.add_parser("train-classifier", help="train the map classifier")
    classify.add_argument("--samples", type=int, default=8, help="synthetic samples per class")
    classify.add_argument("--size", type=int, default=64)
    classify.add_argument("--epochs", type=int, default=1)
    classify.add_argument("--batch-size", type=int, default=4)
    classify.add_argument("--max-batches", type=int, default=None)
    classify.add_argument("--seed", type=int, default=0)
    classify.add_argument("--out", default=None, help="bundle directory to export into")
    classify.set_defaults(func=_classifier_command)

    detect = sub.add_parser("finetune-detector", help="fine-tune the text detector")
    detect.add_argument("--samples", type=int, default=4, help="synthetic images per stage")
    detect.add_argument("--size", type=int, default=64)
    detect.add_argument("--epochs", type=int, default=1, help="epochs per stage")
    detect.add_argument("--batch-size", type=int, default=2)
    detect.add_argument("--max-steps", type=int, default=None, help="steps per stage")
    detect.add_argument("--seed", type=int, default=0)
    detect.add_argument("--out", default=None, help="bundle directory to export into")
    detect.set_defaults(func=_detector_command)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
