"""First stream of the analysis pipeline: draft prompts, quality, gating.

The draft prompt and the quality rubric are byte-stable templates; golden
copies live under tests/golden and changing a section label is a breaking
change for every stored prompt fixture.

Gating is a free pre-filter: it looks only at presence and byte length of
the draft and never calls a backend. Whether the draft content is worth
caching is decided later by the quality scorer.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .gateway import CompletionRequest, LlmGateway, MalformedResponse
from .model import DraftImage, Problem, StudentSubmission

DRAFT_STAGE_TAG = "draft-analysis"

SECTION_TASK = "## Task"
SECTION_PROBLEM = "## Problem"
SECTION_FORMAT = "## Output format"
QUALITY_RUBRIC_HEADER = "## Scoring rubric"

QUALITY_CRITERIA = (
    "clarity",
    "spatial_utilization",
    "organization",
    "consistency",
    "correction_traces",
    "neatness",
)

CRITERION_MAX = 5
DEFAULT_MIN_DRAFT_BYTES = 100


@dataclass(frozen=True)
class DraftAnalysis:
    """What the multimodal model saw in the draft."""

    summary: str
    extracted_steps: tuple[str, ...]
    backend_name: str

    def __post_init__(self) -> None:
        if not self.summary:
            raise ValueError("summary must be nonempty")


@dataclass(frozen=True)
class DraftQualityScore:
    clarity: int
    spatial_utilization: int
    organization: int
    consistency: int
    correction_traces: int
    neatness: int

    def __post_init__(self) -> None:
        for name in QUALITY_CRITERIA:
            value = getattr(self, name)
            if not isinstance(value, int) or not 0 <= value <= CRITERION_MAX:
                raise ValueError(f"criterion {name} must be an integer in 0..5")

    @property
    def overall(self) -> float:
        total = sum(getattr(self, name) for name in QUALITY_CRITERIA)
        return total / (len(QUALITY_CRITERIA) * CRITERION_MAX)


class GateVerdict(Enum):
    PROCEED = "proceed"
    REQUEST_REDO = "request_redo"


@dataclass(frozen=True)
class GateDecision:
    verdict: GateVerdict
    reason: str


def assemble_draft_prompt(problem: Problem) -> str:
    """Three labeled sections: task, problem statement, output format."""
    return (
        f"{SECTION_TASK}\n"
        "You are given a photograph of a student's scratch work for a math\n"
        "problem. Describe the specific content of the draft and the solving\n"
        "process it shows, step by step.\n"
        "\n"
        f"{SECTION_PROBLEM}\n"
        f"{problem.statement}\n"
        "\n"
        f"{SECTION_FORMAT}\n"
        "Reply with one SUMMARY: line describing the work, followed by one\n"
        "STEP: line per identified intermediate step, in order.\n"
    )


def assemble_quality_prompt() -> str:
    criteria = ", ".join(QUALITY_CRITERIA)
    return (
        f"{QUALITY_RUBRIC_HEADER}\n"
        "Score the attached draft on each criterion below with an integer\n"
        f"from 0 (worst) to {CRITERION_MAX} (best): {criteria}.\n"
        "\n"
        f"{SECTION_FORMAT}\n"
        "Reply with a single SCORES: line of the form\n"
        "SCORES: clarity=N, spatial_utilization=N, organization=N,"
        " consistency=N, correction_traces=N, neatness=N\n"
    )


_SUMMARY_LINE = re.compile(r"^SUMMARY:\s*(.+)$", re.MULTILINE)
_STEP_LINE = re.compile(r"^STEP:\s*(.+)$", re.MULTILINE)
_SCORE_PAIR = re.compile(r"([a-z_]+)\s*=\s*(\d+)")


def analyze_draft(
    gateway: LlmGateway, problem: Problem, draft: DraftImage
) -> DraftAnalysis:
    """Run the multimodal draft-summary call and parse its reply."""
    if draft is None:
        raise ValueError("analyze_draft requires a draft image")
    request = CompletionRequest(
        prompt=assemble_draft_prompt(problem),
        request_tag=DRAFT_STAGE_TAG,
        image=draft,
        temperature=0.0,
    )
    response = gateway.complete(request)
    summary_match = _SUMMARY_LINE.search(response.text)
    if summary_match is None:
        raise MalformedResponse(
            "draft reply had no SUMMARY: line", DRAFT_STAGE_TAG
        )
    steps = tuple(m.group(1).strip() for m in _STEP_LINE.finditer(response.text))
    return DraftAnalysis(
        summary=summary_match.group(1).strip(),
        extracted_steps=steps,
        backend_name=response.backend_name,
    )


def _parse_scores(text: str) -> DraftQualityScore | None:
    found = {name: int(value) for name, value in _SCORE_PAIR.findall(text)}
    if not all(name in found for name in QUALITY_CRITERIA):
        return None
    try:
        return DraftQualityScore(**{name: found[name] for name in QUALITY_CRITERIA})
    except ValueError:
        return None


def score_draft_quality(gateway: LlmGateway, draft: DraftImage) -> DraftQualityScore:
    """Score the draft on the six rubric criteria; one reprompt on garbage."""
    prompt = assemble_quality_prompt()
    request = CompletionRequest(
        prompt=prompt, request_tag=DRAFT_STAGE_TAG, image=draft, temperature=0.0
    )
    score = _parse_scores(gateway.complete(request).text)
    if score is not None:
        return score
    retry_prompt = (
        prompt
        + "\nYour previous reply could not be parsed. Reply with exactly one"
        " SCORES: line and nothing else.\n"
    )
    retry = CompletionRequest(
        prompt=retry_prompt, request_tag=DRAFT_STAGE_TAG, image=draft, temperature=0.0
    )
    score = _parse_scores(gateway.complete(retry).text)
    if score is None:
        raise MalformedResponse(
            "backend did not return six parseable scores", DRAFT_STAGE_TAG
        )
    return score


def gate_submission(
    sub: StudentSubmission, min_draft_bytes: int = DEFAULT_MIN_DRAFT_BYTES
) -> GateDecision:
    """Cheap pre-filter: request a redo when the draft is missing or tiny."""
    if sub.draft is None:
        return GateDecision(
            GateVerdict.REQUEST_REDO,
            "missing draft: please redo the problem and upload your scratch work",
        )
    if sub.draft.byte_length < min_draft_bytes:
        return GateDecision(
            GateVerdict.REQUEST_REDO,
            "draft unreadable: the uploaded image is too small to analyze",
        )
    return GateDecision(GateVerdict.PROCEED, "draft present and legible")
