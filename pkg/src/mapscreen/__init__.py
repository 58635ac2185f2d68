"""Batch screening of map images for omitted island names.

The pipeline classifies each image as a Vietnam map or not, spots text
regions, recognizes their contents, and fuzzy-matches the recognized
strings against a vocabulary of island names.  An image is flagged
positive when it is a Vietnam map on which none of the island names
appear.
"""

from mapscreen.matching import MatchPolicy, MatchResult, levenshtein, match_any, match_instance
from mapscreen.pipeline import PipelineConfig, Verdict, decide, screen_batch, screen_image
from mapscreen.textnorm import normalize

__version__ = "0.1.0"

__all__ = [
    "MatchPolicy",
    "MatchResult",
    "PipelineConfig",
    "Verdict",
    "decide",
    "levenshtein",
    "match_any",
    "match_instance",
    "normalize",
    "screen_batch",
    "screen_image",
    "__version__",
]
