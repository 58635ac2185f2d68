"""In-memory datasets for smoke runs and tests.

Real runs read image folders; these builders synthesize batches with
the same sample shapes, so every loop in this package can run without
any data on disk.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch.utils.data import Dataset


class TrainingDataError(ValueError):
    """The provided dataset cannot support the requested training run."""


class ClassificationDataset(Dataset):
    """Tensor-backed (image, label) pairs."""

    def __init__(self, images: torch.Tensor, labels: torch.Tensor):
        if images.shape[0] != labels.shape[0]:
            raise TrainingDataError("images and labels disagree on sample count")
        self.images = images
        self.labels = labels

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, index: int):
        return self.images[index], self.labels[index]

    def class_counts(self, num_classes: int) -> list[int]:
        return [int((self.labels == c).sum()) for c in range(num_classes)]


def synthetic_classification(n_per_class: int, size: int = 64, seed: int = 0) -> ClassificationDataset:
    """Two visually distinct classes: dark noise vs bright noise."""
    generator = torch.Generator().manual_seed(seed)
    dark = torch.rand((n_per_class, 3, size, size), generator=generator) * 0.4
    bright = torch.rand((n_per_class, 3, size, size), generator=generator) * 0.4 + 0.6
    images = torch.cat([dark, bright])
    labels = torch.cat([torch.zeros(n_per_class), torch.ones(n_per_class)]).long()
    return ClassificationDataset(images, labels)


@dataclass(frozen=True)
class DetectionSample:
    """One detector training image with its text-box ground truth."""

    image: torch.Tensor  # (3, H, W) in [0, 1]
    boxes: tuple[tuple[float, float, float, float], ...]  # x0, y0, x1, y1 pixels
    mask: torch.Tensor = field(repr=False, default=None)  # (1, H/4, W/4) target


class DetectionDataset(Dataset):
    def __init__(self, samples: list[DetectionSample]):
        self.samples = list(samples)

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, index: int) -> DetectionSample:
        return self.samples[index]


def render_mask(size: int, boxes, scale: int = 4) -> torch.Tensor:
    mask = torch.zeros((1, size // scale, size // scale))
    for x0, y0, x1, y1 in boxes:
        mask[0, int(y0) // scale : int(y1) // scale, int(x0) // scale : int(x1) // scale] = 1.0
    return mask


def synthetic_detection(n: int, size: int = 64, boxes_per_image: int = 2, seed: int = 0) -> DetectionDataset:
    """Gray images with bright rectangles where the boxes sit."""
    generator = torch.Generator().manual_seed(seed)
    samples = []
    for _ in range(n):
        image = torch.rand((3, size, size), generator=generator) * 0.2 + 0.4
        boxes = []
        for _ in range(boxes_per_image):
            x0 = int(torch.randint(0, size // 2, (1,), generator=generator))
            y0 = int(torch.randint(0, size // 2, (1,), generator=generator))
            w = int(torch.randint(8, size // 2, (1,), generator=generator))
            h = int(torch.randint(8, size // 4 + 8, (1,), generator=generator))
            box = (float(x0), float(y0), float(min(x0 + w, size)), float(min(y0 + h, size)))
            boxes.append(box)
            image[:, int(box[1]) : int(box[3]), int(box[0]) : int(box[2])] = 0.9
        samples.append(
            DetectionSample(image=image, boxes=tuple(boxes), mask=render_mask(size, boxes))
        )
    return DetectionDataset(samples)
