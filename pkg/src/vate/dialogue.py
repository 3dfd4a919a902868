"""Multi-round guided tutoring on top of a completed error analysis.

Every tutor prompt embeds the five tutoring rules from the pinned
fixture file (fixtures/tutor_constraints.txt); editing that file is a
versioned event. Tutor text is additionally passed through a syntactic
leakage guard before being committed: while the session is not yet
effective, the correct answer must never appear as a standalone token.
The guard is deliberately word-boundary based, not semantic; a paraphrase
can slip through, but the syntactic rule is testable and sound.

Sessions are serialized individually (one writer at a time per session);
distinct sessions are fully concurrent.
"""

from __future__ import annotations

import re
import threading
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .gateway import CompletionRequest, LlmGateway
from .model import (
    ErrorCauseAnalysis,
    NormalizedAnswer,
    Problem,
    StudentSubmission,
    answers_equal,
    normalize_answer,
)

DIALOGUE_STAGE_TAG = "dialogue"
DIALOGUE_TEMPERATURE = 0.7

OPENING_MARKER = "[[OPENING]]"
REGENERATE_MARKER = "[[REGENERATE]]"
REDACTION_PLACEHOLDER = "[hidden]"

SECTION_PROBLEM = "## Problem"
SECTION_EXPLANATION = "## Explanation"
SECTION_STUDENT_ANSWER = "## Student answer"
SECTION_ANALYSIS = "## Error analysis"
SECTION_CONVERSATION = "## Conversation"
SECTION_MESSAGE = "## Student message"

MODERATE_MIN_CHARS = 15
MODERATE_MAX_CHARS = 120

DEFAULT_IDLE_TIMEOUT_MS = 24 * 60 * 60 * 1000


class SessionClosed(Exception):
    """The session no longer accepts turns."""


class ProblemMismatch(Exception):
    """A resubmission was offered to a session for a different problem."""


class UnknownSession(KeyError):
    """No session with that id exists."""


class Speaker(Enum):
    STUDENT = "student"
    TUTOR = "tutor"


class GuardEvent(Enum):
    LEAK_REDACTED = "leak_redacted"
    REGENERATED = "regenerated"


class QualityBucket(Enum):
    NO_DIALOGUE = "no_dialogue"
    TOO_SHORT = "too_short"
    MODERATE = "moderate"
    TOO_LONG = "too_long"


@dataclass(frozen=True)
class Turn:
    speaker: Speaker
    text: str
    at: int
    guard_events: tuple[GuardEvent, ...] = ()

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("turn text must be nonempty")


@dataclass(frozen=True)
class DialogueQuality:
    bucket: QualityBucket
    student_char_count: int


@dataclass
class DialogueSession:
    session_id: str
    student_id: str
    problem: Problem
    analysis: ErrorCauseAnalysis
    student_answer: NormalizedAnswer | None = None
    turns: list[Turn] = field(default_factory=list)
    effective: bool = False
    closed: bool = False
    opened_at: int = 0
    last_activity_at: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def problem_id(self) -> str:
        return self.problem.problem_id

    def student_char_count(self) -> int:
        return sum(len(t.text) for t in self.turns if t.speaker is Speaker.STUDENT)


def bucket_for(student_char_count: int, has_student_turns: bool = True) -> QualityBucket:
    """Bucket by student character count; 15 and 120 are both inclusive."""
    if not has_student_turns:
        return QualityBucket.NO_DIALOGUE
    if student_char_count < MODERATE_MIN_CHARS:
        return QualityBucket.TOO_SHORT
    if student_char_count <= MODERATE_MAX_CHARS:
        return QualityBucket.MODERATE
    return QualityBucket.TOO_LONG


def classify_dialogue_quality(session: DialogueSession) -> DialogueQuality:
    count = session.student_char_count()
    has_student_turns = any(t.speaker is Speaker.STUDENT for t in session.turns)
    return DialogueQuality(
        bucket=bucket_for(count, has_student_turns), student_char_count=count
    )


def _leak_pattern(correct: NormalizedAnswer) -> re.Pattern[str] | None:
    if not correct.canonical:
        return None
    # Lookarounds instead of \b so answers that start or end with a
    # non-word character still anchor correctly.
    return re.compile(
        rf"(?<!\w){re.escape(correct.canonical)}(?!\w)", re.IGNORECASE
    )


def guard_tutor_message(
    text: str,
    correct: NormalizedAnswer,
    effective: bool,
    regenerate=None,
) -> tuple[str, tuple[GuardEvent, ...]]:
    """Keep the correct answer out of tutor text until the student earns it.

    If the text leaks and a ``regenerate`` callable is supplied, one
    regeneration is attempted; a still-leaking regeneration (or a missing
    callable) falls back to token redaction.
    """
    if effective:
        return text, ()
    pattern = _leak_pattern(correct)
    if pattern is None or not pattern.search(text):
        return text, ()
    events: list[GuardEvent] = []
    if regenerate is not None:
        events.append(GuardEvent.REGENERATED)
        text = regenerate()
        if not pattern.search(text):
            return text, tuple(events)
    events.append(GuardEvent.LEAK_REDACTED)
    return pattern.sub(REDACTION_PLACEHOLDER, text), tuple(events)


def load_constraints_text() -> str:
    return (
        resources.files("vate").joinpath("fixtures/tutor_constraints.txt").read_text(
            encoding="utf-8"
        )
    )


def _now_ms() -> int:
    return int(time.time() * 1000)


class DialogueEngine:
    """Creates and drives tutoring sessions over a model gateway."""

    def __init__(
        self,
        gateway: LlmGateway,
        clock=_now_ms,
        idle_timeout_ms: int = DEFAULT_IDLE_TIMEOUT_MS,
        constraints_text: str | None = None,
    ):
        self._gateway = gateway
        self._clock = clock
        self._idle_timeout_ms = idle_timeout_ms
        self._constraints = (
            constraints_text if constraints_text is not None else load_constraints_text()
        )
        self._store_lock = threading.Lock()
        self._sessions: dict[str, DialogueSession] = {}
        self._by_student_problem: dict[tuple[str, str], list[str]] = {}

    # -- store ------------------------------------------------------------

    def get(self, session_id: str) -> DialogueSession:
        with self._store_lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise UnknownSession(session_id) from None

    def sessions_for(self, student_id: str, problem_id: str) -> list[DialogueSession]:
        with self._store_lock:
            ids = self._by_student_problem.get((student_id, problem_id), [])
            return [self._sessions[i] for i in ids]

    def sessions_for_student(self, student_id: str) -> list[DialogueSession]:
        with self._store_lock:
            return [s for s in self._sessions.values() if s.student_id == student_id]

    # -- prompt assembly ----------------------------------------------------

    def _transcript(self, session: DialogueSession) -> str:
        if not session.turns:
            return "(no turns yet)"
        lines = []
        for turn in session.turns:
            speaker = "Tutor" if turn.speaker is Speaker.TUTOR else "Student"
            lines.append(f"{speaker}: {' '.join(turn.text.splitlines())}")
        return "\n".join(lines)

    def _assemble_prompt(
        self, session: DialogueSession, student_message: str, regenerate: bool = False
    ) -> str:
        answer_text = (
            session.student_answer.canonical
            if session.student_answer is not None
            else "(not recorded)"
        )
        parts = [
            self._constraints.rstrip("\n"),
            "",
            SECTION_PROBLEM,
            session.problem.statement,
            "",
            SECTION_EXPLANATION,
            session.problem.explanation,
            "",
            SECTION_STUDENT_ANSWER,
            answer_text,
            "",
            SECTION_ANALYSIS,
            session.analysis.cause,
            session.analysis.suggestion,
            "",
            SECTION_CONVERSATION,
            self._transcript(session),
            "",
            SECTION_MESSAGE,
            student_message,
        ]
        if regenerate:
            parts += [
                "",
                f"{REGENERATE_MARKER} The previous reply revealed the answer."
                " Reply again with a hint that does not state the final answer.",
            ]
        return "\n".join(parts) + "\n"

    def _generate(self, session: DialogueSession, student_message: str, regenerate: bool) -> str:
        request = CompletionRequest(
            prompt=self._assemble_prompt(session, student_message, regenerate),
            request_tag=DIALOGUE_STAGE_TAG,
            temperature=DIALOGUE_TEMPERATURE,
        )
        return self._gateway.complete(request).text

    def _committed_tutor_turn(
        self, session: DialogueSession, student_message: str
    ) -> Turn:
        raw = self._generate(session, student_message, regenerate=False)
        text, events = guard_tutor_message(
            raw,
            normalize_answer(session.problem.correct_answer),
            session.effective,
            regenerate=lambda: self._generate(session, student_message, regenerate=True),
        )
        turn = Turn(
            speaker=Speaker.TUTOR,
            text=text,
            at=self._clock(),
            guard_events=events,
        )
        session.turns.append(turn)
        session.last_activity_at = turn.at
        return turn

    # -- lifecycle ----------------------------------------------------------

    def open_session(
        self,
        analysis: ErrorCauseAnalysis,
        problem: Problem,
        student_id: str,
        student_answer: NormalizedAnswer | None = None,
    ) -> DialogueSession:
        if analysis is None:
            raise ValueError("open_session requires a completed analysis")
        now = self._clock()
        session = DialogueSession(
            session_id=uuid.uuid4().hex,
            student_id=student_id,
            problem=problem,
            analysis=analysis,
            student_answer=student_answer,
            opened_at=now,
            last_activity_at=now,
        )
        self._committed_tutor_turn(session, OPENING_MARKER)
        with self._store_lock:
            self._sessions[session.session_id] = session
            self._by_student_problem.setdefault(
                (student_id, problem.problem_id), []
            ).append(session.session_id)
        return session

    def _expire_if_idle(self, session: DialogueSession) -> None:
        if session.closed:
            return
        if self._clock() - session.last_activity_at > self._idle_timeout_ms:
            session.closed = True

    def next_tutor_turn(self, session: DialogueSession, student_message: str) -> Turn:
        if not student_message:
            raise ValueError("student message must be nonempty")
        with session._lock:
            self._expire_if_idle(session)
            if session.closed:
                raise SessionClosed(session.session_id)
            if session.turns and session.turns[-1].speaker is not Speaker.TUTOR:
                raise ValueError("turns must alternate; awaiting a tutor turn")
            session.turns.append(
                Turn(speaker=Speaker.STUDENT, text=student_message, at=self._clock())
            )
            return self._committed_tutor_turn(session, student_message)

    def mark_effectiveness(
        self, session: DialogueSession, resubmission: StudentSubmission
    ) -> bool:
        if resubmission.problem_id != session.problem_id:
            raise ProblemMismatch(
                f"session {session.session_id} is for {session.problem_id!r}, "
                f"not {resubmission.problem_id!r}"
            )
        with session._lock:
            if session.closed:
                return session.effective
            if answers_equal(resubmission.raw_answer, session.problem.correct_answer):
                session.effective = True
                session.closed = True
            session.last_activity_at = self._clock()
            return session.effective

    def note_resubmission(self, sub: StudentSubmission) -> None:
        """Offer a new submission to every open session for its problem."""
        for session in self.sessions_for(sub.student_id, sub.problem_id):
            if not session.closed:
                self.mark_effectiveness(session, sub)
