"""Text normalization shared by the matcher and the dataset tooling.

Recognized map text arrives in mixed case, with Vietnamese diacritics and
ragged whitespace; policy vocabularies are plain lowercase ASCII.  All
distance computations therefore run on a single canonical form produced
by :func:`normalize`.
"""

from __future__ import annotations

import unicodedata

__all__ = ["fold_diacritics", "normalize"]

# Letters that carry no combining mark after canonical decomposition but
# still need an ASCII fold.
_EXTRA_FOLDS = str.maketrans({"đ": "d", "Đ": "D"})  # dj / DJ stroke


def fold_diacritics(text: str) -> str:
    """Strip combining marks from *text* and fold dj-stroke to plain d.

    Covers the full Vietnamese alphabet: every tonal and vowel-quality
    mark decomposes to a combining character under NFD.
    """
    decomposed = unicodedata.normalize("NFD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.translate(_EXTRA_FOLDS)


def normalize(text: str) -> str:
    """Return the canonical matching form of an arbitrary Unicode string.

    Applies, in order: canonical composition (NFC), lowercasing,
    diacritic folding, collapse of every whitespace run to one space,
    and trimming.  Total and idempotent:

    >>> normalize("Hoàng Sa")
    'hoang sa'
    >>> normalize("  TRƯỜNG   SA ")
    'truong sa'
    """
    composed = unicodedata.normalize("NFC", text)
    folded = fold_diacritics(composed.lower())
    return " ".join(folded.split())
