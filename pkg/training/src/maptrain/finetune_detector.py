"""Two-stage detector fine-tuning.

The detector is first fitted on generic scene-text boxes, then on map
label boxes; STAGE_ORDER pins that sequence and this module enforces
it.  Each stage minimizes binary cross-entropy between the predicted
probability map and the rasterized box mask.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .data import DetectionDataset, TrainingDataError
from .models import build_detector
from .recipes import STAGE_ORDER, DetectorRecipe


@dataclass(frozen=True)
class DetectorStage:
    name: str
    dataset: DetectionDataset


@dataclass
class DetectorOutcome:
    model: nn.Module
    stage_losses: dict[str, list[float]]
    provenance: tuple[str, ...]


def _check_stages(stages) -> None:
    names = tuple(stage.name for stage in stages)
    if names != STAGE_ORDER:
        raise ValueError(f"stages must be {list(STAGE_ORDER)} in that order, got {list(names)}")
    # Map-box annotations are the whole point of the second stage.
    map_stage = stages[-1]
    for index in range(len(map_stage.dataset)):
        if not map_stage.dataset[index].boxes:
            raise TrainingDataError(f"map_boxes sample {index} has no boxes")


def finetune_detector(
    stages: list[DetectorStage],
    recipe: DetectorRecipe,
    max_steps_per_stage: int | None = None,
    seed: int = 0,
) -> DetectorOutcome:
    _check_stages(stages)
    torch.manual_seed(seed)
    model = build_detector()
    model.train()
    optimizer = torch.optim.SGD(model.parameters(), lr=recipe.learning_rate, momentum=recipe.momentum)
    criterion = nn.BCELoss()

    stage_losses: dict[str, list[float]] = {}
    for stage in stages:
        losses: list[float] = []
        done = False
        for _ in range(recipe.epochs_per_stage):
            if done:
                break
            for start in range(0, len(stage.dataset), recipe.batch_size):
                batch = [stage.dataset[i] for i in range(start, min(start + recipe.batch_size, len(stage.dataset)))]
                images = torch.stack([sample.image for sample in batch])
                masks = torch.stack([sample.mask for sample in batch])
                optimizer.zero_grad()
                loss = criterion(model(images), masks)
                loss.backward()
                optimizer.step()
                losses.append(float(loss.detach()))
                if max_steps_per_stage is not None and len(losses) >= max_steps_per_stage:
                    done = True
                    break
        stage_losses[stage.name] = losses
    return DetectorOutcome(model=model, stage_losses=stage_losses, provenance=tuple(s.name for s in stages))
