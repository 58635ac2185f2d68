"""Training hyperparameters.

The classifier and detector values are the reference training setup;
fields marked as working defaults were not part of it and exist so the
scripts run standalone.
"""

from __future__ import annotations

from dataclasses import dataclass

# The detector is fine-tuned in two stages, in this exact order: a
# general scene-text corpus first, then the annotated map label boxes.
STAGE_ORDER = ("scene_text", "map_boxes")


@dataclass(frozen=True)
class ClassifierRecipe:
    """Binary map classifier on an EfficientNet-B4 backbone."""

    epochs: int = 100
    batch_size: int = 4
    learning_rate: float = 0.1
    augment: tuple[str, ...] = ("random_crop", "horizontal_flip")
    num_classes: int = 2
    # working defaults, not part of the reference setup
    optimizer: str = "sgd"
    momentum: float = 0.9
    input_size: tuple[int, int] = (380, 380)

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.num_classes != 2:
            raise ValueError("the screening contract is binary; num_classes must be 2")


@dataclass(frozen=True)
class DetectorRecipe:
    """Text detector with a ResNet-50 backbone, fine-tuned in two stages."""

    batch_size: int = 2
    learning_rate: float = 0.001
    augment: tuple[str, ...] = ("random_crop", "random_rotate")
    # working defaults, not part of the reference setup
    epochs_per_stage: int = 1
    optimizer: str = "sgd"
    momentum: float = 0.9
    input_size: tuple[int, int] = (736, 736)

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs_per_stage < 1:
            raise ValueError("batch_size and epochs_per_stage must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
