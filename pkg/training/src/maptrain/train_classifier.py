"""Classifier training loop.

SGD over cross-entropy, driven entirely by a ClassifierRecipe.  The
loop refuses to start when any class has no samples: a single-class run
would converge to a constant model and poison every downstream stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.utils.data import DataLoader

from .data import ClassificationDataset, TrainingDataError
from .models import build_classifier
from .recipes import ClassifierRecipe


@dataclass
class TrainOutcome:
    model: nn.Module
    losses: list[float]


def _check_class_coverage(dataset: ClassificationDataset, num_classes: int) -> None:
    counts = dataset.class_counts(num_classes)
    empty = [c for c, n in enumerate(counts) if n == 0]
    if empty:
        raise TrainingDataError(f"no samples for class {empty[0]}; every class needs at least one")


def train_classifier(
    dataset: ClassificationDataset,
    recipe: ClassifierRecipe,
    max_batches: int | None = None,
    seed: int = 0,
) -> TrainOutcome:
    """Train a fresh classifier on `dataset`.

    `max_batches` caps the total number of optimizer steps across all
    epochs; leave it unset for a full run.
    """
    _check_class_coverage(dataset, recipe.num_classes)
    torch.manual_seed(seed)
    model = build_classifier(recipe.num_classes)
    model.train()
    optimizer = torch.optim.SGD(model.parameters(), lr=recipe.learning_rate, momentum=recipe.momentum)
    criterion = nn.CrossEntropyLoss()
    loader = DataLoader(
        dataset,
        batch_size=recipe.batch_size,
        shuffle=True,
        generator=torch.Generator().manual_seed(seed),
    )

    losses: list[float] = []
    for _ in range(recipe.epochs):
        for images, labels in loader:
            optimizer.zero_grad()
            loss = criterion(model(images), labels)
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))
            if max_batches is not None and len(losses) >= max_batches:
                return TrainOutcome(model=model, losses=losses)
    return TrainOutcome(model=model, losses=losses)
