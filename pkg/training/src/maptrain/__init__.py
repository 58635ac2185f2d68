"""Training side of the map screening system.

Produces model bundles (TorchScript modules plus meta.json) in the
layout the screening engine's model-file backend loads.  The engine
itself is consumed only through that bundle contract and its CLI.
"""

from maptrain.export import BundleBuilder
from maptrain.finetune_detector import DetectorStage, finetune_detector
from maptrain.recipes import ClassifierRecipe, DetectorRecipe, STAGE_ORDER
from maptrain.train_classifier import train_classifier

__all__ = [
    "BundleBuilder",
    "ClassifierRecipe",
    "DetectorRecipe",
    "DetectorStage",
    "STAGE_ORDER",
    "finetune_detector",
    "train_classifier",
]
