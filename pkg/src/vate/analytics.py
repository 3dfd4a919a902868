"""Learning-outcome metrics and their report groupings.

Four per-knowledge-point counters describe one learning session: how many
answers were wrong (niact), how many questions were attempted (nqct), the
correct-answer rate (arct), and how many times the student went back to
relearn the material (nvrs). Reports aggregate those per-session values
into fixed row layouts: a three-row outcome table split by conversation
use and effectiveness, a seven-row table of repeat-learning counts split
by dialogue quality, and a per-element win-rate map for prompt-ablation
judgments.

Everything here is pure aggregation over immutable inputs; results do not
depend on input order beyond row membership.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .dialogue import DialogueQuality, QualityBucket, bucket_for

OUTCOME_METRICS = ("niact", "nqct", "arct", "nvrs")


class MixedSessions(ValueError):
    """Events from different sessions were passed as one session."""


class DuplicateJudgment(ValueError):
    """Two judgments for the same (record_id, ablated) pair."""


class EventKind(Enum):
    ATTEMPT = "attempt"
    RELEARN = "relearn"
    DIALOGUE_LINK = "dialogue_link"


class AblatedElement(Enum):
    DRAFT = "draft"
    PROBLEM = "problem"
    SOLUTION = "solution"
    ANSWER = "answer"


class Winner(Enum):
    FULL = "full"
    ABLATED = "ablated"


@dataclass(frozen=True)
class LearningEvent:
    """One record in a session's event stream.

    Field use depends on kind: attempts carry problem, knowledge point and
    correctness; relearns carry the knowledge point; dialogue links carry
    the dialogue session id plus an effectiveness / student-character
    snapshot taken when the link was recorded.
    """

    student_id: str
    session_ref: str
    kind: EventKind
    at: int
    problem_id: str | None = None
    knowledge_point_id: str | None = None
    correct: bool | None = None
    dialogue_session_id: str | None = None
    effective: bool | None = None
    student_char_count: int | None = None

    def __post_init__(self) -> None:
        if self.kind is EventKind.ATTEMPT:
            if self.problem_id is None or self.knowledge_point_id is None:
                raise ValueError("attempt events need problem and knowledge point")
            if self.correct is None:
                raise ValueError("attempt events need a correctness flag")
        elif self.kind is EventKind.RELEARN:
            if self.knowledge_point_id is None:
                raise ValueError("relearn events need a knowledge point")
        elif self.kind is EventKind.DIALOGUE_LINK:
            if self.dialogue_session_id is None:
                raise ValueError("dialogue_link events need a session id")


@dataclass(frozen=True)
class KpMetrics:
    niact: int
    nqct: int
    arct: float
    nvrs: int

    def __post_init__(self) -> None:
        if not 0 <= self.niact <= max(self.nqct, 0):
            raise ValueError("niact must satisfy 0 <= niact <= nqct")
        if self.nvrs < 0:
            raise ValueError("nvrs must be >= 0")


@dataclass(frozen=True)
class SessionMetrics:
    session_ref: str
    per_kp: Mapping[str, KpMetrics]

    def kp(self, knowledge_point_id: str) -> KpMetrics:
        return self.per_kp.get(knowledge_point_id, KpMetrics(0, 0, 0.0, 0))


@dataclass(frozen=True)
class ReportRow:
    label: str
    n: int
    means: Mapping[str, float] | None

    def __post_init__(self) -> None:
        if (self.n == 0) != (self.means is None):
            raise ValueError("means are absent exactly when a row is empty")


@dataclass(frozen=True)
class GroupedReport:
    kind: str
    rows: tuple[ReportRow, ...]


@dataclass(frozen=True)
class AblationJudgment:
    record_id: str
    ablated: AblatedElement
    winner: Winner


@dataclass(frozen=True)
class RepeatRecord:
    """Repeat-learning count for one (session, knowledge point) pair.

    The count comes from the hosting learning system; this module only
    aggregates it.
    """

    session_ref: str
    knowledge_point_id: str
    count: int

    def __post_init__(self) -> None:
        if self.count < 0:
            raise ValueError("repeat count must be >= 0")


def session_metrics(events: Sequence[LearningEvent]) -> SessionMetrics:
    """Fold one session's events into per-knowledge-point counters."""
    refs = {event.session_ref for event in events}
    if len(refs) > 1:
        raise MixedSessions(f"events span sessions {sorted(refs)!r}")
    session_ref = refs.pop() if refs else ""

    incorrect: dict[str, int] = defaultdict(int)
    total: dict[str, int] = defaultdict(int)
    relearns: dict[str, int] = defaultdict(int)
    for event in events:
        if event.kind is EventKind.ATTEMPT:
            total[event.knowledge_point_id] += 1
            if not event.correct:
                incorrect[event.knowledge_point_id] += 1
        elif event.kind is EventKind.RELEARN:
            relearns[event.knowledge_point_id] += 1

    per_kp: dict[str, KpMetrics] = {}
    for kp in set(total) | set(relearns):
        nqct = total[kp]
        niact = incorrect[kp]
        arct = (nqct - niact) / nqct if nqct > 0 else 0.0
        per_kp[kp] = KpMetrics(niact=niact, nqct=nqct, arct=arct, nvrs=relearns[kp])
    return SessionMetrics(session_ref=session_ref, per_kp=per_kp)


def _session_scalar(metrics: SessionMetrics, name: str) -> float | None:
    """Collapse per-KP values to one per-session number (mean across KPs).

    Knowledge points without attempts are excluded from the arct mean
    (their rate is defined as zero but carries no signal); they still
    contribute to the count means.
    """
    if name == "arct":
        values = [m.arct for m in metrics.per_kp.values() if m.nqct > 0]
    else:
        values = [getattr(m, name) for m in metrics.per_kp.values()]
    if not values:
        return None
    return sum(values) / len(values)


_OUTCOME_ROWS = (
    (False, False, "no conversation"),
    (True, False, "conversation, not effective"),
    (True, True, "conversation, effective"),
)


def group_report(
    sessions: Iterable[tuple[SessionMetrics, bool, bool]],
) -> GroupedReport:
    """Three-row outcome table split by (conversation, effective)."""
    buckets: dict[tuple[bool, bool], list[SessionMetrics]] = defaultdict(list)
    for metrics, conversation, effective in sessions:
        if effective and not conversation:
            raise ValueError(
                "effective without conversation is not a representable row"
            )
        buckets[(conversation, effective)].append(metrics)

    rows = []
    for conversation, effective, label in _OUTCOME_ROWS:
        members = buckets.get((conversation, effective), [])
        if not members:
            rows.append(ReportRow(label=label, n=0, means=None))
            continue
        means = {}
        for name in OUTCOME_METRICS:
            values = [
                v for m in members if (v := _session_scalar(m, name)) is not None
            ]
            means[name] = sum(values) / len(values) if values else 0.0
        rows.append(ReportRow(label=label, n=len(members), means=means))
    return GroupedReport(kind="outcomes", rows=tuple(rows))


_REPEAT_ROWS: tuple[tuple[str, QualityBucket | None, bool | None], ...] = (
    ("no dialogue", None, None),
    ("too short, not effective", QualityBucket.TOO_SHORT, False),
    ("too short, effective", QualityBucket.TOO_SHORT, True),
    ("moderate, not effective", QualityBucket.MODERATE, False),
    ("moderate, effective", QualityBucket.MODERATE, True),
    ("too long, not effective", QualityBucket.TOO_LONG, False),
    ("too long, effective", QualityBucket.TOO_LONG, True),
)


def repeat_learning_report(
    sessions: Iterable[tuple[int, bool, bool, DialogueQuality]],
) -> GroupedReport:
    """Seven-row repeat-learning table split by dialogue quality."""
    counts: dict[tuple[QualityBucket | None, bool | None], list[int]] = defaultdict(
        list
    )
    for repeat_count, conversation, effective, quality in sessions:
        if repeat_count < 0:
            raise ValueError("repeat count must be >= 0")
        if not conversation or quality.bucket is QualityBucket.NO_DIALOGUE:
            counts[(None, None)].append(repeat_count)
        else:
            counts[(quality.bucket, effective)].append(repeat_count)

    rows = []
    for label, bucket, effective in _REPEAT_ROWS:
        members = counts.get((bucket, effective), [])
        if not members:
            rows.append(ReportRow(label=label, n=0, means=None))
        else:
            mean = sum(members) / len(members)
            rows.append(
                ReportRow(label=label, n=len(members), means={"repeat_count": mean})
            )
    return GroupedReport(kind="repeat", rows=tuple(rows))


def win_rate(
    judgments: Iterable[AblationJudgment],
) -> dict[AblatedElement, float]:
    """Per-element fraction of judgments won by the full prompt."""
    seen: set[tuple[str, AblatedElement]] = set()
    full: dict[AblatedElement, int] = defaultdict(int)
    total: dict[AblatedElement, int] = defaultdict(int)
    for judgment in judgments:
        key = (judgment.record_id, judgment.ablated)
        if key in seen:
            raise DuplicateJudgment(f"duplicate judgment {key!r}")
        seen.add(key)
        total[judgment.ablated] += 1
        if judgment.winner is Winner.FULL:
            full[judgment.ablated] += 1
    return {element: full[element] / total[element] for element in total}


# -- event file ingestion --------------------------------------------------


@dataclass(frozen=True)
class EventLog:
    events: tuple[LearningEvent, ...]
    repeat_records: tuple[RepeatRecord, ...]


def _event_from_record(record: dict) -> LearningEvent:
    kind = EventKind(record["kind"])
    return LearningEvent(
        student_id=record["student_id"],
        session_ref=record["session_ref"],
        kind=kind,
        at=int(record["at"]),
        problem_id=record.get("problem_id"),
        knowledge_point_id=record.get("knowledge_point_id"),
        correct=record.get("correct"),
        dialogue_session_id=record.get("dialogue_session_id"),
        effective=record.get("effective"),
        student_char_count=record.get("student_char_count"),
    )


def load_events(path: str | Path) -> EventLog:
    """Read a line-delimited event file (see docs/events_format.md)."""
    events: list[LearningEvent] = []
    repeats: list[RepeatRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            try:
                if record.get("kind") == "repeat_learning":
                    repeats.append(
                        RepeatRecord(
                            session_ref=record["session_ref"],
                            knowledge_point_id=record["knowledge_point_id"],
                            count=int(record["count"]),
                        )
                    )
                else:
                    events.append(_event_from_record(record))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad event record: {exc}") from exc
    return EventLog(events=tuple(events), repeat_records=tuple(repeats))


@dataclass(frozen=True)
class SessionView:
    """Everything one session contributes to the reports."""

    metrics: SessionMetrics
    conversation: bool
    effective: bool
    quality: DialogueQuality


def sessions_from_log(log: EventLog) -> dict[str, SessionView]:
    """Group an event log by session and derive report inputs.

    Conversation means the student actually wrote something in at least
    one linked dialogue; an effective dialogue only counts if the student
    conversed in it. The quality bucket is computed over the session's
    total student characters across linked dialogues.
    """
    by_session: dict[str, list[LearningEvent]] = defaultdict(list)
    for event in log.events:
        by_session[event.session_ref].append(event)

    views: dict[str, SessionView] = {}
    for session_ref, events in by_session.items():
        links = [e for e in events if e.kind is EventKind.DIALOGUE_LINK]
        chars = sum(e.student_char_count or 0 for e in links)
        conversation = chars > 0
        effective = any(
            e.effective and (e.student_char_count or 0) > 0 for e in links
        )
        quality = DialogueQuality(
            bucket=bucket_for(chars, has_student_turns=conversation),
            student_char_count=chars,
        )
        views[session_ref] = SessionView(
            metrics=session_metrics(events),
            conversation=conversation,
            effective=effective,
            quality=quality,
        )
    return views


def outcomes_report_from_log(log: EventLog) -> GroupedReport:
    views = sessions_from_log(log)
    return group_report(
        (v.metrics, v.conversation, v.effective) for v in views.values()
    )


def repeat_report_from_log(log: EventLog) -> GroupedReport:
    views = sessions_from_log(log)
    tuples = []
    for record in log.repeat_records:
        view = views.get(record.session_ref)
        if view is None:
            tuples.append(
                (
                    record.count,
                    False,
                    False,
                    DialogueQuality(bucket=QualityBucket.NO_DIALOGUE, student_char_count=0),
                )
            )
        else:
            tuples.append((record.count, view.conversation, view.effective, view.quality))
    return repeat_learning_report(tuples)


def render_report_table(report: GroupedReport) -> str:
    """Fixed-width human-readable table for one report."""
    if not report.rows:
        return "(empty report)"
    metric_names = OUTCOME_METRICS if report.kind == "outcomes" else ("repeat_count",)
    header = ["group", "n", *metric_names]
    body = []
    for row in report.rows:
        cells = [row.label, str(row.n)]
        for name in metric_names:
            cells.append(f"{row.means[name]:.3f}" if row.means else "-")
        body.append(cells)
    widths = [
        max(len(line[i]) for line in [header, *body]) for i in range(len(header))
    ]
    lines = [
        "  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip()
        for line in [header, *body]
    ]
    return "\n".join(lines)


def report_records(report: GroupedReport) -> list[dict]:
    """Structured row records mirroring the table."""
    return [
        {
            "report": report.kind,
            "group": row.label,
            "n": row.n,
            "means": dict(row.means) if row.means is not None else None,
        }
        for row in report.rows
    ]
