"""Model constructors matching the bundle contracts.

classifier: (B,3,H,W) -> (B,2) logits
detector:   (B,3,H,W) -> (B,1,H/4,W/4) text probability map in [0,1]
"""

from __future__ import annotations

import torch
from torch import nn
from torchvision.models import efficientnet_b4, resnet50


def build_classifier(num_classes: int = 2) -> nn.Module:
    model = efficientnet_b4(weights=None)
    in_features = model.classifier[-1].in_features
    model.classifier[-1] = nn.Linear(in_features, num_classes)
    return model


class ProbMapHead(nn.Module):
    """Collapse backbone features to a single upsampled probability map."""

    def __init__(self, in_channels: int):
        super().__init__()
        self.reduce = nn.Sequential(
            nn.Conv2d(in_channels, 64, kernel_size=3, padding=1),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
            nn.Conv2d(64, 1, kernel_size=1),
        )

    def forward(self, features: torch.Tensor, out_size: tuple[int, int]) -> torch.Tensor:
        logits = self.reduce(features)
        logits = nn.functional.interpolate(logits, size=out_size, mode="bilinear", align_corners=False)
        return torch.sigmoid(logits)


class TextDetector(nn.Module):
    """ResNet-50 feature extractor with a probability-map head."""

    def __init__(self):
        super().__init__()
        backbone = resnet50(weights=None)
        # stem + first two stages: stride 8 features, cheap enough to tune
        self.features = nn.Sequential(
            backbone.conv1,
            backbone.bn1,
            backbone.relu,
            backbone.maxpool,
            backbone.layer1,
            backbone.layer2,
        )
        self.head = ProbMapHead(in_channels=512)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2], x.shape[-1]
        features = self.features(x)
        return self.head(features, (h // 4, w // 4))


def build_detector() -> nn.Module:
    return TextDetector()
