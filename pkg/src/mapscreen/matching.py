"""Vocabulary matching on recognized map text.

A recognized string matches the policy when its edit distance to some
vocabulary term passes the configured threshold test.  Screening large
archives only ever needs distances up to that threshold, so the hot path
is a banded Levenshtein that bails out as soon as the bound is exceeded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from mapscreen.textnorm import normalize

__all__ = [
    "DEFAULT_TERMS",
    "MatchOutcome",
    "MatchPolicy",
    "MatchResult",
    "levenshtein",
    "levenshtein_bounded",
    "match_any",
    "match_instance",
]

DEFAULT_TERMS = ("hoang sa", "truong sa", "spratly", "paracel")

_INF = float("inf")


def levenshtein(a: str, b: str) -> int:
    """Exact edit distance (unit-cost insert/delete/substitute).

    Operates on Unicode code points, so accented Vietnamese characters
    count as single symbols.
    """
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,  # delete from a
                    current[j - 1] + 1,  # insert into a
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


def levenshtein_bounded(a: str, b: str, bound: int) -> int | None:
    """Edit distance if it is <= *bound*, else None.

    Agrees exactly with :func:`levenshtein` whenever the true distance is
    within the bound.  Only cells within *bound* of the diagonal can hold
    a value <= bound, so the DP is restricted to that band and abandoned
    once a whole row exceeds the bound.
    """
    if bound < 0:
        raise ValueError("bound must be >= 0")
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if abs(la - lb) > bound:
        return None
    if la < lb:
        a, b, la, lb = b, a, lb, la
    if lb == 0:
        return la  # la <= bound holds after the length check
    previous: list[float] = [j if j <= bound else _INF for j in range(lb + 1)]
    for i in range(1, la + 1):
        ca = a[i - 1]
        lo = max(1, i - bound)
        hi = min(lb, i + bound)
        current: list[float] = [_INF] * (lb + 1)
        if i <= bound:
            current[0] = i
        for j in range(lo, hi + 1):
            cb = b[j - 1]
            best = previous[j - 1] + (ca != cb)
            if previous[j] + 1 < best:
                best = previous[j] + 1
            if current[j - 1] + 1 < best:
                best = current[j - 1] + 1
            current[j] = best
        if min(min(current[lo : hi + 1]), current[0]) > bound:
            return None
        previous = current
    distance = previous[lb]
    return int(distance) if distance <= bound else None


@dataclass(frozen=True)
class MatchPolicy:
    """Vocabulary terms plus the threshold test applied to edit distances.

    ``comparator`` selects how the threshold is applied: ``"strict"``
    accepts distances strictly below it, ``"inclusive"`` also accepts
    equality.  ``granularity`` selects what the distance is measured
    against: the whole recognized instance, or every contiguous window of
    one or two whitespace-separated tokens.
    """

    terms: tuple[str, ...] = DEFAULT_TERMS
    threshold: int = 2
    comparator: str = "strict"
    granularity: str = "instance"

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("policy terms must be non-empty")
        if self.threshold < 0:
            raise ValueError("lambda must be a non-negative integer")
        if self.comparator not in ("strict", "inclusive"):
            raise ValueError(f"comparator must be 'strict' or 'inclusive', got {self.comparator!r}")
        if self.granularity not in ("instance", "token"):
            raise ValueError(f"granularity must be 'instance' or 'token', got {self.granularity!r}")
        normalized = tuple(sorted({normalize(t) for t in self.terms}))
        if any(not t for t in normalized):
            raise ValueError("policy terms must not normalize to the empty string")
        object.__setattr__(self, "terms", normalized)

    @property
    def max_accepted_distance(self) -> int:
        """Largest distance the comparator accepts; -1 when nothing can match."""
        return self.threshold if self.comparator == "inclusive" else self.threshold - 1


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one recognized instance against a policy.

    ``term`` and ``distance`` are present exactly when ``matched`` is
    true; ``distance`` is then the minimum over all terms, with ties
    broken by lexicographic term order.
    """

    matched: bool
    term: str | None
    distance: int | None
    input_normalized: str


@dataclass(frozen=True)
class MatchOutcome:
    """Result of matching a batch of recognized instances."""

    any_matched: bool
    matches: tuple[MatchResult, ...] = field(default_factory=tuple)


def _candidate_windows(normalized: str, granularity: str) -> list[str]:
    if granularity == "instance":
        return [normalized]
    tokens = normalized.split(" ")
    windows = list(tokens)
    windows.extend(" ".join(tokens[i : i + 2]) for i in range(len(tokens) - 1))
    return windows


def match_instance(text: str, policy: MatchPolicy) -> MatchResult:
    """Match one recognized string against the policy vocabulary.

    The input is normalized first; empty or whitespace-only input never
    matches.  The reported distance is the minimum over all terms (and,
    in token granularity, over all 1-2 token windows).
    """
    normalized = normalize(text)
    if not normalized:
        return MatchResult(matched=False, term=None, distance=None, input_normalized=normalized)
    bound = policy.max_accepted_distance
    if bound < 0:
        return MatchResult(matched=False, term=None, distance=None, input_normalized=normalized)
    candidates = _candidate_windows(normalized, policy.granularity)
    best_term: str | None = None
    best_distance: int | None = None
    for term in policy.terms:  # stored sorted: first hit wins ties
        for candidate in candidates:
            d = levenshtein_bounded(candidate, term, bound)
            if d is not None and (best_distance is None or d < best_distance):
                best_term, best_distance = term, d
    if best_distance is None:
        return MatchResult(matched=False, term=None, distance=None, input_normalized=normalized)
    return MatchResult(matched=True, term=best_term, distance=best_distance, input_normalized=normalized)


def match_any(instances: list[str] | tuple[str, ...], policy: MatchPolicy) -> MatchOutcome:
    """Match every recognized instance; true when at least one matches."""
    matches = tuple(match_instance(text, policy) for text in instances)
    return MatchOutcome(any_matched=any(m.matched for m in matches), matches=matches)
