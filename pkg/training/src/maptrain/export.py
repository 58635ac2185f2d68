"""Bundle export.

Trained models leave this package as a bundle directory: one
TorchScript file per stage plus ``meta.json``.  That layout is the
hand-off contract with the screening engine, which loads the bundle
read-only; see docs/formats.md in the engine repo.

Each model is traced and serialized once, at add time.  ``write``
only copies bytes, so exporting the same builder twice produces
byte-identical bundles.
"""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Sequence

import torch
from torch import nn

from .recipes import STAGE_ORDER, ClassifierRecipe, DetectorRecipe

META_FILE = "meta.json"
STAGE_FILES = {
    "classifier": "classifier.pt",
    "detector": "detector.pt",
    "recognizer": "recognizer.pt",
}
CLASSIFIER_LABELS = ("not_vietnam_map", "vietnam_map")
RECOGNIZER_SIZE = (32, 128)


class ExportError(RuntimeError):
    """A model could not be traced or packaged."""


def _freeze(module: nn.Module, example: torch.Tensor) -> bytes:
    module = module.eval()
    try:
        if isinstance(module, torch.jit.ScriptModule):
            scripted = module
        else:
            with torch.no_grad():
                scripted = torch.jit.trace(module, example)
    except Exception as exc:
        raise ExportError(f"tracing failed: {exc}") from exc
    buffer = io.BytesIO()
    torch.jit.save(scripted, buffer)
    return buffer.getvalue()


class BundleBuilder:
    """Collects stage models, then writes them as one bundle."""

    def __init__(self, mean: Sequence[float] = (0.0, 0.0, 0.0), std: Sequence[float] = (1.0, 1.0, 1.0)):
        # Training here feeds raw [0, 1] pixels, hence identity stats.
        self._blobs: dict[str, bytes] = {}
        self._meta: dict = {"mean": list(mean), "std": list(std)}

    def add_classifier(
        self,
        model: nn.Module,
        recipe: ClassifierRecipe,
        labels: Sequence[str] = CLASSIFIER_LABELS,
    ) -> None:
        height, width = recipe.input_size
        self._blobs["classifier"] = _freeze(model, torch.zeros((1, 3, height, width)))
        self._meta["classifier"] = {"input_size": [height, width], "labels": list(labels)}

    def add_detector(
        self,
        model: nn.Module,
        recipe: DetectorRecipe,
        provenance: Sequence[str] = STAGE_ORDER,
    ) -> None:
        height, width = recipe.input_size
        self._blobs["detector"] = _freeze(model, torch.zeros((1, 3, height, width)))
        self._meta["detector"] = {
            "input_size": [height, width],
            "finetune_stages": list(provenance),
        }

    def add_recognizer(
        self,
        module: nn.Module,
        charset: Sequence[str],
        input_size: tuple[int, int] = RECOGNIZER_SIZE,
    ) -> None:
        """Package the (externally trained) recognizer.

        `charset` maps output indices to characters; index 0 must be
        the CTC blank.
        """
        if len(charset) < 2:
            raise ExportError("recognizer charset needs the blank plus at least one character")
        height, width = input_size
        self._blobs["recognizer"] = _freeze(module, torch.zeros((1, 3, height, width)))
        self._meta["recognizer"] = {"input_size": [height, width], "labels": list(charset)}

    def write(self, out_dir: Path | str) -> Path:
        if not self._blobs:
            raise ExportError("nothing to export; add at least one stage first")
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for stage, blob in self._blobs.items():
            (out / STAGE_FILES[stage]).write_bytes(blob)
        (out / META_FILE).write_text(json.dumps(self._meta, sort_keys=True, indent=2) + "\n")
        return out
