"""End-to-end submission handling: gate, verdict, pool, dual-stream analysis.

The flow for one submission is strictly ordered and each step can
short-circuit the rest:

1. gate the draft (free, no backend);
2. offer the submission to any open dialogue sessions for effectiveness;
3. compare against the correct answer; a correct answer touches nothing;
4. pool lookup; a hit returns the cached analysis with zero backend calls;
5. on a miss: draft summary, draft quality score, error-cause analysis;
6. cache the analysis if the measured quality clears the pool's gate;
7. open a dialogue session and return the outcome.

Per-key single-flight locking makes concurrent misses on the same key
coalesce, so the number of error-analysis backend calls stays bounded by
the number of distinct keys even under racing submissions.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .dialogue import DialogueEngine
from .draft import (
    DraftAnalysis,
    GateVerdict,
    analyze_draft,
    gate_submission,
    score_draft_quality,
)
from .gateway import CompletionRequest, LlmGateway, MalformedResponse
from .model import (
    AnalysisSource,
    DraftImage,
    ErrorCauseAnalysis,
    NormalizedAnswer,
    Problem,
    StudentSubmission,
    answers_equal,
    normalize_answer,
)
from .pool import ErrorPool, PoolKey

ERROR_STAGE_TAG = "error-analysis"

SECTION_PROBLEM = "## Problem"
SECTION_SOLUTION = "## Solution"
SECTION_CORRECT_ANSWER = "## Correct answer"
SECTION_EXPLANATION = "## Explanation"
SECTION_STUDENT_ANSWER = "## Student incorrect answer"
SECTION_DRAFT_ANALYSIS = "## Draft analysis"

PROMPT_HEADER = (
    "You are a mathematics teacher reviewing one student's mistake.\n"
    "Work through every section below, find the root cause of the error,\n"
    "and give one concrete, encouraging follow-up suggestion.\n"
)
PROMPT_FOOTER = "Reply with one CAUSE: line followed by one SUGGESTION: line.\n"


class UnknownProblem(KeyError):
    """The submission references a problem id nobody registered."""


class Ablation(Enum):
    NONE = "none"
    DROP_DRAFT = "drop_draft"
    DROP_PROBLEM = "drop_problem"
    DROP_SOLUTION = "drop_solution"
    DROP_ANSWER = "drop_answer"


class Verdict(Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    REDO_REQUESTED = "redo_requested"


@dataclass(frozen=True)
class AnalysisBundle:
    problem: Problem
    student_answer: NormalizedAnswer
    draft_analysis: DraftAnalysis
    ablation: Ablation = Ablation.NONE


@dataclass(frozen=True)
class SubmissionOutcome:
    verdict: Verdict
    analysis: ErrorCauseAnalysis | None = None
    session_id: str | None = None
    redo_reason: str | None = None

    def __post_init__(self) -> None:
        incorrect = self.verdict is Verdict.INCORRECT
        if incorrect != (self.analysis is not None):
            raise ValueError("analysis must be present iff verdict is incorrect")
        if incorrect != (self.session_id is not None):
            raise ValueError("session_id must be present iff verdict is incorrect")
        redo = self.verdict is Verdict.REDO_REQUESTED
        if redo != (self.redo_reason is not None):
            raise ValueError("redo_reason must be present iff a redo is requested")


class ProblemRepository:
    """In-memory problem registry keyed by problem id."""

    def __init__(self, problems=()):
        self._problems: dict[str, Problem] = {}
        for problem in problems:
            self.add(problem)

    def add(self, problem: Problem) -> None:
        if problem.problem_id in self._problems:
            raise ValueError(f"duplicate problem id {problem.problem_id!r}")
        self._problems[problem.problem_id] = problem

    def get(self, problem_id: str) -> Problem:
        try:
            return self._problems[problem_id]
        except KeyError:
            raise UnknownProblem(problem_id) from None

    def __len__(self) -> int:
        return len(self._problems)

    def __iter__(self):
        return iter(self._problems.values())

    @classmethod
    def from_ndjson(cls, path: str | Path) -> "ProblemRepository":
        repo = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                repo.add(
                    Problem(
                        problem_id=record["problem_id"],
                        statement=record["statement"],
                        solution=record["solution"],
                        explanation=record["explanation"],
                        correct_answer=record["correct_answer"],
                        knowledge_point_ids=tuple(record["knowledge_point_ids"]),
                    )
                )
        return repo


def _draft_section_body(draft_analysis: DraftAnalysis) -> str:
    body = draft_analysis.summary
    if draft_analysis.extracted_steps:
        body += "\n" + "\n".join(f"- {s}" for s in draft_analysis.extracted_steps)
    return body


_ABLATED_SECTION = {
    Ablation.DROP_DRAFT: SECTION_DRAFT_ANALYSIS,
    Ablation.DROP_PROBLEM: SECTION_PROBLEM,
    Ablation.DROP_SOLUTION: SECTION_SOLUTION,
    Ablation.DROP_ANSWER: SECTION_STUDENT_ANSWER,
}


def assemble_error_prompt(bundle: AnalysisBundle) -> str:
    """Six labeled sections plus guiding instructions.

    Under a non-NONE ablation exactly one section is omitted and the
    remaining five are byte-identical to the unablated assembly.
    """
    sections = [
        (SECTION_PROBLEM, bundle.problem.statement),
        (SECTION_SOLUTION, bundle.problem.solution),
        (SECTION_CORRECT_ANSWER, bundle.problem.correct_answer),
        (SECTION_EXPLANATION, bundle.problem.explanation),
        (SECTION_STUDENT_ANSWER, bundle.student_answer.canonical),
        (SECTION_DRAFT_ANALYSIS, _draft_section_body(bundle.draft_analysis)),
    ]
    dropped = _ABLATED_SECTION.get(bundle.ablation)
    blocks = [PROMPT_HEADER]
    blocks += [f"{label}\n{body}\n" for label, body in sections if label != dropped]
    blocks.append(PROMPT_FOOTER)
    return "\n".join(blocks)


def _parse_cause_suggestion(text: str) -> tuple[str, str] | None:
    cause_idx = text.find("CAUSE:")
    sugg_idx = text.find("SUGGESTION:")
    if cause_idx < 0 or sugg_idx < 0 or sugg_idx <= cause_idx:
        return None
    cause = text[cause_idx + len("CAUSE:") : sugg_idx].strip()
    suggestion = text[sugg_idx + len("SUGGESTION:") :].strip()
    if not cause or not suggestion:
        return None
    return cause, suggestion


def analyze_error(gateway: LlmGateway, bundle: AnalysisBundle) -> ErrorCauseAnalysis:
    """Second-stream call: turn the assembled prompt into a diagnosis."""
    prompt = assemble_error_prompt(bundle)
    response = gateway.complete(
        CompletionRequest(prompt=prompt, request_tag=ERROR_STAGE_TAG, temperature=0.0)
    )
    parsed = _parse_cause_suggestion(response.text)
    if parsed is None:
        retry_prompt = (
            prompt
            + "\nYour previous reply could not be parsed. Reply with exactly one"
            " CAUSE: line and one SUGGESTION: line.\n"
        )
        response = gateway.complete(
            CompletionRequest(
                prompt=retry_prompt, request_tag=ERROR_STAGE_TAG, temperature=0.0
            )
        )
        parsed = _parse_cause_suggestion(response.text)
        if parsed is None:
            raise MalformedResponse(
                "no CAUSE:/SUGGESTION: pair in backend reply", ERROR_STAGE_TAG
            )
    cause, suggestion = parsed
    return ErrorCauseAnalysis(
        cause=cause,
        suggestion=suggestion,
        source=AnalysisSource.DUAL_STREAM,
        backend_name=response.backend_name,
    )


class AnalysisPipeline:
    """Wires the gate, the pool, both model streams, and the dialogue engine."""

    def __init__(
        self,
        problems: ProblemRepository,
        gateway: LlmGateway,
        pool: ErrorPool,
        dialogue: DialogueEngine,
        min_draft_bytes: int = 100,
        quality_scorer=None,
    ):
        self.problems = problems
        self.gateway = gateway
        self.pool = pool
        self.dialogue = dialogue
        self.min_draft_bytes = min_draft_bytes
        # Override hook: maps a DraftImage to an overall quality in [0, 1]
        # without a backend call. Used by the workload simulator.
        self._quality_scorer = quality_scorer
        self._key_locks: dict[PoolKey, threading.Lock] = {}
        self._key_locks_guard = threading.Lock()

    def _key_lock(self, key: PoolKey) -> threading.Lock:
        with self._key_locks_guard:
            lock = self._key_locks.get(key)
            if lock is None:
                lock = threading.Lock()
                self._key_locks[key] = lock
            return lock

    def _measure_quality(self, draft: DraftImage) -> float:
        if self._quality_scorer is not None:
            return self._quality_scorer(draft)
        return score_draft_quality(self.gateway, draft).overall

    def handle_submission(self, sub: StudentSubmission) -> SubmissionOutcome:
        problem = self.problems.get(sub.problem_id)

        gate = gate_submission(sub, self.min_draft_bytes)
        if gate.verdict is GateVerdict.REQUEST_REDO:
            return SubmissionOutcome(
                verdict=Verdict.REDO_REQUESTED, redo_reason=gate.reason
            )

        # Any gated-through submission counts as a resubmission for the
        # student's open sessions on this problem.
        self.dialogue.note_resubmission(sub)

        if answers_equal(sub.raw_answer, problem.correct_answer):
            return SubmissionOutcome(verdict=Verdict.CORRECT)

        key = PoolKey(
            problem_id=problem.problem_id, answer=normalize_answer(sub.raw_answer)
        )
        with self._key_lock(key):
            entry = self.pool.lookup(key)
            if entry is not None:
                analysis = entry.analysis()
            else:
                draft_analysis = analyze_draft(self.gateway, problem, sub.draft)
                quality = self._measure_quality(sub.draft)
                analysis = analyze_error(
                    self.gateway,
                    AnalysisBundle(
                        problem=problem,
                        student_answer=key.answer,
                        draft_analysis=draft_analysis,
                    ),
                )
                self.pool.try_insert(key, analysis, quality)

        session = self.dialogue.open_session(
            analysis, problem, sub.student_id, student_answer=key.answer
        )
        return SubmissionOutcome(
            verdict=Verdict.INCORRECT, analysis=analysis, session_id=session.session_id
        )
