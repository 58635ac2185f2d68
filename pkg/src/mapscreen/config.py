"""Config file loading and the CLI-over-file-over-defaults merge.

Config files are flat JSON objects.  Unknown keys are rejected rather
than ignored, so typos fail loudly instead of silently running with
defaults.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

from mapscreen.inference import BackendDescriptor
from mapscreen.matching import DEFAULT_TERMS, MatchPolicy
from mapscreen.pipeline import PipelineConfig

__all__ = [
    "BACKEND_CHOICES",
    "ConfigError",
    "KNOWN_KEYS",
    "build_pipeline_config",
    "build_policy",
    "load_config_file",
    "merge_settings",
]

BACKEND_CHOICES = ("mock", "cached", "model")

KNOWN_KEYS = frozenset(
    {
        "terms",
        "lambda",
        "comparator",
        "granularity",
        "classifier_threshold",
        "parallelism",
        "backend",
        "backend_path",
    }
)


class ConfigError(ValueError):
    """Invalid config file or invalid setting values."""


def load_config_file(path: Path | str) -> dict:
    """Parse a JSON config file, resolving backend_path against its dir."""
    p = Path(path)
    try:
        raw = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {p} must hold a JSON object, got {type(data).__name__}")
    unknown = sorted(set(data) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"config file {p} has unknown keys: {unknown}")
    if isinstance(data.get("backend_path"), str):
        data["backend_path"] = str((p.parent / data["backend_path"]).resolve())
    return data


def merge_settings(file_settings: Mapping | None, overrides: Mapping) -> dict:
    """Layer overrides (typically CLI flags) on top of file settings.

    Override entries whose value is None are treated as absent.
    """
    merged: dict = dict(file_settings or {})
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    unknown = sorted(set(merged) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown settings: {unknown}")
    return merged


def _require_int(settings: Mapping, key: str) -> int | None:
    value = settings.get(key)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"setting {key!r} must be an integer, got {value!r}")
    return value


def build_policy(settings: Mapping) -> MatchPolicy:
    terms = settings.get("terms")
    if terms is not None:
        if not isinstance(terms, (list, tuple)) or not all(isinstance(t, str) for t in terms):
            raise ConfigError("setting 'terms' must be a list of strings")
        terms = tuple(terms)
    threshold = _require_int(settings, "lambda")
    kwargs: dict = {}
    if terms is not None:
        kwargs["terms"] = terms
    if threshold is not None:
        kwargs["threshold"] = threshold
    if settings.get("comparator") is not None:
        kwargs["comparator"] = settings["comparator"]
    if settings.get("granularity") is not None:
        kwargs["granularity"] = settings["granularity"]
    try:
        return MatchPolicy(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def build_pipeline_config(settings: Mapping) -> PipelineConfig:
    """Turn merged settings into a PipelineConfig.

    backend 'cached' and 'model' need backend_path (a cache directory
    or a model bundle directory respectively).
    """
    policy = build_policy(settings)
    backend = settings.get("backend", "mock")
    if backend not in BACKEND_CHOICES:
        raise ConfigError(f"setting 'backend' must be one of {list(BACKEND_CHOICES)}, got {backend!r}")
    path = settings.get("backend_path")
    if backend in ("cached", "model"):
        if not path:
            raise ConfigError(f"backend {backend!r} needs 'backend_path'")
        if not Path(path).is_dir():
            raise ConfigError(f"backend_path {path!r} is not a directory")
        kind = "cached" if backend == "cached" else "model-file"
        descriptors = {
            stage: BackendDescriptor(kind=kind, identifier=str(path))
            for stage in ("classifier", "detector", "recognizer")
        }
    else:
        descriptors = {
            "classifier": BackendDescriptor(kind="mock", identifier="vn-map"),
            "detector": BackendDescriptor(kind="mock"),
            "recognizer": BackendDescriptor(kind="mock"),
        }

    threshold = settings.get("classifier_threshold")
    if threshold is not None and (isinstance(threshold, bool) or not isinstance(threshold, (int, float))):
        raise ConfigError(f"setting 'classifier_threshold' must be a number, got {threshold!r}")
    parallelism = _require_int(settings, "parallelism")

    kwargs: dict = {"policy": policy, **descriptors}
    if threshold is not None:
        kwargs["classifier_threshold"] = float(threshold)
    if parallelism is not None:
        kwargs["parallelism"] = parallelism
    try:
        return PipelineConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
