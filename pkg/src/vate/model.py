"""Shared domain types and answer normalization.

Everything here is an immutable value type plus pure functions, so the
module is safe to use from any thread without coordination.

Answer normalization is deliberately formatting-only: it trims and
collapses whitespace, lowercases alphabetic content, and canonicalizes
numeric literals (no leading "+", no trailing ".0", thousands separators
removed). It never attempts algebraic equivalence, so "1/2" and "0.5"
stay distinct: merging them would also merge distinct error causes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

ALLOWED_MEDIA_TYPES = frozenset({"image/png", "image/jpeg", "image/webp"})


@dataclass(frozen=True)
class Problem:
    """A tutorable problem with its worked solution and answer key."""

    problem_id: str
    statement: str
    solution: str
    explanation: str
    correct_answer: str
    knowledge_point_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        for field in ("problem_id", "statement", "solution", "explanation",
                      "correct_answer"):
            if not getattr(self, field):
                raise ValueError(f"{field} must be nonempty")
        if not self.knowledge_point_ids:
            raise ValueError("knowledge_point_ids must be nonempty")
        # Tolerate lists from JSON loaders.
        if not isinstance(self.knowledge_point_ids, tuple):
            object.__setattr__(
                self, "knowledge_point_ids", tuple(self.knowledge_point_ids)
            )


@dataclass(frozen=True)
class DraftImage:
    """A student's scratch-work photo as an opaque byte payload."""

    data: bytes
    media_type: str = "image/png"

    def __post_init__(self) -> None:
        if len(self.data) < 1:
            raise ValueError("draft payload must be at least one byte")
        if self.media_type not in ALLOWED_MEDIA_TYPES:
            raise ValueError(f"unsupported draft media type: {self.media_type!r}")

    @property
    def byte_length(self) -> int:
        return len(self.data)


@dataclass(frozen=True)
class StudentSubmission:
    """One answer attempt, optionally accompanied by a draft image."""

    submission_id: str
    student_id: str
    problem_id: str
    raw_answer: str
    draft: DraftImage | None = None
    submitted_at: int = 0  # UTC milliseconds

    def __post_init__(self) -> None:
        if not self.submission_id:
            raise ValueError("submission_id must be nonempty")
        if not self.raw_answer and self.draft is None:
            raise ValueError("raw_answer may be empty only when a draft is present")


@dataclass(frozen=True)
class NormalizedAnswer:
    """Canonical form of a student answer, suitable for hashing."""

    canonical: str


class AnalysisSource(Enum):
    POOL = "pool"
    DUAL_STREAM = "dual_stream"


@dataclass(frozen=True)
class ErrorCauseAnalysis:
    """Diagnosed cause of a wrong answer plus a follow-up suggestion."""

    cause: str
    suggestion: str
    source: AnalysisSource
    backend_name: str | None = None

    def __post_init__(self) -> None:
        if not self.cause or not self.suggestion:
            raise ValueError("cause and suggestion must be nonempty")
        if self.source is AnalysisSource.POOL and self.backend_name is not None:
            raise ValueError("pool-sourced analyses carry no backend name")


_WHITESPACE = re.compile(r"\s+")
# A comma acting as a thousands separator: digit,DDD followed by a non-digit.
_THOUSANDS_COMMA = re.compile(r"(?<=\d),(?=\d{3}(?!\d))")
_NUMBER = re.compile(r"[+-]?\d+(?:\.\d+)?")


def _canonize_number(match: re.Match[str]) -> str:
    token = match.group(0)
    sign = "-" if token.startswith("-") else ""
    token = token.lstrip("+-")
    if "." in token:
        integral, fraction = token.split(".", 1)
        fraction = fraction.rstrip("0")
    else:
        integral, fraction = token, ""
    integral = integral.lstrip("0") or "0"
    token = integral + ("." + fraction if fraction else "")
    if token == "0":
        sign = ""
    return sign + token


def normalize_answer(raw: str) -> NormalizedAnswer:
    """Canonicalize an answer string. Deterministic and idempotent."""
    text = raw.lower()
    text = _WHITESPACE.sub(" ", text).strip()
    text = _THOUSANDS_COMMA.sub("", text)
    text = _NUMBER.sub(_canonize_number, text)
    return NormalizedAnswer(canonical=text)


def answers_equal(a: str, b: str) -> bool:
    """True iff the two answers normalize to the same canonical form."""
    return normalize_answer(a).canonical == normalize_answer(b).canonical
