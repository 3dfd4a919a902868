"""Deterministic offline backend for the product-plus-constant family.

Problems shaped like "a × b + c" are common enough in arithmetic drills to
make a fully scripted diagnosis useful: the classic slips (stopping after
the product, adding before multiplying, dropping a carry) are recognizable
from the wrong answer alone. The backend replays those diagnoses without a
network, which keeps the whole service runnable and testable offline.

Draft quality is derived from the image bytes: the first byte of the
payload's SHA-256 digest, modulo six, is the level assigned to every
rubric criterion. That makes quality reproducible for any payload and
lets callers manufacture drafts at a chosen level.
"""

from __future__ import annotations

import hashlib
import re

from .dialogue import (
    OPENING_MARKER,
    REGENERATE_MARKER,
    SECTION_ANALYSIS,
    SECTION_CONVERSATION,
    SECTION_MESSAGE,
)
from .draft import QUALITY_CRITERIA, QUALITY_RUBRIC_HEADER
from .gateway import CompletionRequest, CompletionResponse

SLIP_FORGOT_ADDITION = "forgot-final-addition"
SLIP_PRECEDENCE = "precedence-error"
SLIP_CARRY = "carry-error"
SLIP_UNKNOWN = "unknown"
SLIP_LABELS = (SLIP_FORGOT_ADDITION, SLIP_PRECEDENCE, SLIP_CARRY, SLIP_UNKNOWN)

PRODUCT_PLUS_CONSTANT = re.compile(r"(\d+)\s*[×x*]\s*(\d+)\s*\+\s*(\d+)")

_SECTION_RE = re.compile(r"^## .+$", re.MULTILINE)
_INT_RE = re.compile(r"-?\d+")

_MIN_PAYLOAD_BYTES = 120

# Reference payloads at known quality levels (4 -> 0.8 and 1 -> 0.2).
NEAT_DRAFT = b"neat-draft 18" + b"." * 107
SCRIBBLE_DRAFT = b"scribble-draft 11" + b"." * 103


def parse_product_plus_constant(text: str) -> tuple[int, int, int] | None:
    match = PRODUCT_PLUS_CONSTANT.search(text)
    if match is None:
        return None
    return int(match.group(1)), int(match.group(2)), int(match.group(3))


def classify_slip(a: int, b: int, c: int, wrong_answer: str) -> str:
    """Name the arithmetic slip behind a wrong answer to a*b+c."""
    match = _INT_RE.search(wrong_answer.replace(",", ""))
    if match is None:
        return SLIP_UNKNOWN
    wrong = int(match.group())
    correct = a * b + c
    if wrong == correct:
        return SLIP_UNKNOWN
    if wrong == a * b:
        return SLIP_FORGOT_ADDITION
    if wrong == a * (b + c):
        return SLIP_PRECEDENCE
    if re.fullmatch(r"10+", str(abs(wrong - correct))):
        return SLIP_CARRY
    return SLIP_UNKNOWN


def scripted_diagnose(statement: str, wrong_answer: str) -> tuple[str, str]:
    """Return a (cause, suggestion) pair for the recognized slip."""
    parsed = parse_product_plus_constant(statement)
    if parsed is None:
        return (
            f"[{SLIP_UNKNOWN}] The mistake does not match a known slip pattern"
            " for this problem.",
            "Redo the problem slowly and compare each step with the solution.",
        )
    a, b, c = parsed
    label = classify_slip(a, b, c, wrong_answer)
    if label == SLIP_FORGOT_ADDITION:
        return (
            f"[{label}] The student computed {a} x {b} = {a * b} correctly but"
            f" stopped there, never adding {c}.",
            "Don't forget to add after completing the multiplication.",
        )
    if label == SLIP_PRECEDENCE:
        return (
            f"[{label}] The student added {b} + {c} first and then multiplied"
            f" by {a}, ignoring that multiplication comes before addition.",
            "Multiplication binds tighter than addition: compute the product"
            " first, then add.",
        )
    if label == SLIP_CARRY:
        return (
            f"[{label}] The digits suggest a dropped or extra carry while"
            f" multiplying {a} by {b} or adding {c}.",
            "Redo the column arithmetic and write every carry above its"
            " column before moving on.",
        )
    return (
        f"[{label}] The mistake does not match a known slip pattern for this"
        " problem.",
        "Redo the problem slowly and compare each step with the solution.",
    )


def quality_level(data: bytes) -> int:
    """Digest-derived rubric level in 0..5 for a draft payload."""
    return hashlib.sha256(data).digest()[0] % 6


def scripted_overall_quality(data: bytes) -> float:
    return quality_level(data) / 5.0


def draft_bytes_for_quality(passing: bool, seed: str = "draft") -> bytes:
    """Manufacture a payload whose digest level passes (>= 3) or fails (< 3)."""
    wanted = {3, 4, 5} if passing else {0, 1, 2}
    for n in range(1_000_000):
        data = f"{seed}#{n}".encode()
        data += b"." * max(0, _MIN_PAYLOAD_BYTES - len(data))
        if quality_level(data) in wanted:
            return data
    raise RuntimeError("no payload found; digest rule is broken")


def _split_sections(prompt: str) -> dict[str, str]:
    """Map each '## ' header line to the body text under it."""
    sections: dict[str, str] = {}
    headers = list(_SECTION_RE.finditer(prompt))
    for i, match in enumerate(headers):
        end = headers[i + 1].start() if i + 1 < len(headers) else len(prompt)
        sections[match.group().strip()] = prompt[match.end() : end].strip()
    return sections


class ScriptedBackend:
    """Rule-based responder covering all three request stages."""

    name = "scripted"

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if request.request_tag == "draft-analysis":
            if request.image is None:
                raise ValueError("draft-analysis requests must carry an image")
            if QUALITY_RUBRIC_HEADER in request.prompt:
                text = self._score_reply(request.image.data)
            else:
                text = self._summary_reply(request.prompt)
        elif request.request_tag == "error-analysis":
            text = self._diagnosis_reply(request.prompt)
        elif request.request_tag == "dialogue":
            text = self._dialogue_reply(request.prompt)
        else:
            raise ValueError(f"no script for stage {request.request_tag!r}")
        return CompletionResponse(
            text=text,
            input_tokens=max(1, len(request.prompt) // 4),
            output_tokens=max(1, len(text) // 4),
            latency_ms=3,
            backend_name=self.name,
        )

    # -- draft stream -----------------------------------------------------

    def _score_reply(self, data: bytes) -> str:
        level = quality_level(data)
        pairs = ", ".join(f"{name}={level}" for name in QUALITY_CRITERIA)
        return f"SCORES: {pairs}"

    def _summary_reply(self, prompt: str) -> str:
        sections = _split_sections(prompt)
        statement = sections.get("## Problem", "")
        parsed = parse_product_plus_constant(statement)
        if parsed is None:
            return (
                "SUMMARY: The draft shows partial scratch work that does not"
                " map onto a known problem shape.\n"
                "STEP: illegible working"
            )
        a, b, c = parsed
        return (
            f"SUMMARY: The draft shows {a} multiplied by {b} in columns,"
            f" reaching {a * b}; the final addition of {c} is not visible.\n"
            f"STEP: {a} x {b} = {a * b}\n"
            f"STEP: + {c} (not carried out on the draft)"
        )

    # -- error stream -----------------------------------------------------

    def _diagnosis_reply(self, prompt: str) -> str:
        sections = _split_sections(prompt)
        statement = sections.get("## Problem", "")
        wrong = sections.get("## Student incorrect answer", "")
        cause, suggestion = scripted_diagnose(statement, wrong)
        return f"CAUSE: {cause}\nSUGGESTION: {suggestion}"

    # -- dialogue stream --------------------------------------------------

    def _dialogue_reply(self, prompt: str) -> str:
        sections = _split_sections(prompt)
        statement = sections.get("## Problem", "")
        analysis = sections.get(SECTION_ANALYSIS, "")
        conversation = sections.get(SECTION_CONVERSATION, "")
        message = sections.get(SECTION_MESSAGE, "")
        regenerate = REGENERATE_MARKER in message
        if regenerate:
            message = message.split(REGENERATE_MARKER, 1)[0].strip()
        parsed = parse_product_plus_constant(statement)
        lowered = message.lower()

        if regenerate:
            if "spoil" in lowered and parsed is not None:
                a, b, c = parsed
                return f"Fine, no games: the answer is {a * b + c}."
            if parsed is not None:
                _, _, c = parsed
                return (
                    "I hear you, and you are close. Remember the final step:"
                    f" add {c} once the multiplication is done. What do you"
                    " get then?"
                )
            return (
                "Let's keep at it together. Re-read the problem and tell me"
                " which operation comes first."
            )

        if message == OPENING_MARKER:
            cause_line = analysis.splitlines()[0] if analysis else ""
            lead = f"I looked over your work. {cause_line}".strip()
            return (
                f"{lead} Let's fix it together, one step at a time: which"
                " operation does this problem ask you to perform first?"
            )

        if "give up" in lowered or "spoil" in lowered:
            if parsed is not None:
                a, b, c = parsed
                return f"Alright, I'll just tell you: the answer is {a * b + c}."
            return "Alright, I'll just tell you: the answer is the one on the sheet."

        if "what is the answer" in lowered or "tell me the answer" in lowered:
            return (
                "I won't hand you the result; you can reach it yourself."
                " Start from the multiplication you already did and think"
                " about what the problem asks for next."
            )

        if any(word in lowered for word in ("game", "movie", "weather", "lunch")):
            return (
                "Let's stay focused on this problem for now; we can chat"
                " after you crack it. Where did your calculation stop?"
            )

        tutor_turns = sum(
            1 for line in conversation.splitlines() if line.startswith("Tutor:")
        )
        if parsed is None:
            return (
                "Take the problem one clause at a time and tell me the first"
                " quantity you can compute."
            )
        a, b, c = parsed
        hints = (
            f"Start with just the product: what is {a} times {b}? Write it"
            " out in columns.",
            f"Good progress. The problem does not end at the product; there"
            f" is still a + {c} waiting. What does your result become once"
            " you include it?",
            f"Walk through it slowly: first {a} times {b}, then add {c} to"
            " that product, checking each digit as you go.",
        )
        return hints[min(max(tutor_turns - 1, 0), len(hints) - 1)]
