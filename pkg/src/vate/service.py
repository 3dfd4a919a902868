"""HTTP surface for submissions, tutoring dialogue, and reports.

Request and response shapes are pinned in docs/api_schema.json; handlers
parse JSON bodies by hand so every error, validation failure included,
comes back in the same {code, message, retriable} envelope. All routes
except the health probe require the static bearer token taken from the
VATE_API_TOKEN environment variable.
"""

from __future__ import annotations

import base64
import hashlib
import os
import threading
import time
import uuid

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .analytics import (
    AblatedElement,
    AblationJudgment,
    DuplicateJudgment,
    EventKind,
    GroupedReport,
    LearningEvent,
    RepeatRecord,
    Winner,
    group_report,
    repeat_learning_report,
    report_records,
    session_metrics,
    win_rate,
)
from .config import Components
from .dialogue import (
    DialogueQuality,
    DialogueSession,
    SessionClosed,
    UnknownSession,
    bucket_for,
    classify_dialogue_quality,
)
from .gateway import GatewayError
from .model import DraftImage, StudentSubmission
from .pipeline import UnknownProblem, Verdict

API_TOKEN_ENV = "VATE_API_TOKEN"
MAX_DRAFT_BYTES = 5 * 1024 * 1024

ERROR_CODES = (
    "UnknownProblem",
    "SessionClosed",
    "ProblemMismatch",
    "BackendUnavailable",
    "BadRequest",
)


class ApiFault(Exception):
    """Carries the pinned error envelope to the exception handler."""

    def __init__(self, status: int, code: str, message: str):
        if code not in ERROR_CODES:
            raise ValueError(f"unknown error code {code!r}")
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message

    def body(self) -> dict:
        return {
            "code": self.code,
            "message": self.message,
            "retriable": self.code == "BackendUnavailable",
        }


def _bad_request(message: str) -> ApiFault:
    return ApiFault(422, "BadRequest", message)


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise _bad_request("request body must be valid JSON") from None
    if not isinstance(body, dict):
        raise _bad_request("request body must be a JSON object")
    return body


def _require_str(body: dict, field: str) -> str:
    value = body.get(field)
    if not isinstance(value, str) or not value:
        raise _bad_request(f"field {field!r} must be a nonempty string")
    return value


def _decode_draft(body: dict) -> DraftImage | None:
    raw = body.get("draft")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise _bad_request("field 'draft' must be an object")
    encoded = raw.get("data")
    if not isinstance(encoded, str) or not encoded:
        raise _bad_request("draft.data must be a base64 string")
    if len(encoded) > MAX_DRAFT_BYTES * 4 // 3 + 4:
        raise _bad_request("draft exceeds the 5 MB limit")
    try:
        data = base64.b64decode(encoded, validate=True)
    except Exception:
        raise _bad_request("draft.data is not valid base64") from None
    if len(data) > MAX_DRAFT_BYTES:
        raise _bad_request("draft exceeds the 5 MB limit")
    media_type = raw.get("media_type", "image/png")
    try:
        return DraftImage(data=data, media_type=media_type)
    except ValueError as exc:
        raise _bad_request(str(exc)) from None


def _turn_repr(turn) -> dict:
    return {
        "speaker": turn.speaker.value,
        "text": turn.text,
        "at": turn.at,
        "guard_events": [event.value for event in turn.guard_events],
    }


def _quality_repr(quality: DialogueQuality) -> dict:
    return {
        "bucket": quality.bucket.value,
        "student_char_count": quality.student_char_count,
    }


def _report_repr(report: GroupedReport) -> dict:
    return {"kind": report.kind, "rows": report_records(report)}


class ServiceState:
    """Mutable per-instance state beyond the wired components."""

    def __init__(self) -> None:
        self.lock = threading.Lock()
        self.events: list[LearningEvent] = []
        self.repeat_records: list[RepeatRecord] = []
        self.judgments: list[AblationJudgment] = []
        self.judgment_keys: set[tuple[str, AblatedElement]] = set()
        self.idempotency: dict[str, tuple[str, dict]] = {}


def _now_ms() -> int:
    return int(time.time() * 1000)


def create_app(components: Components, api_token: str | None = None) -> FastAPI:
    token = api_token if api_token is not None else os.environ.get(API_TOKEN_ENV)
    if not token:
        raise RuntimeError(
            f"no API token: set {API_TOKEN_ENV} or pass api_token explicitly"
        )

    app = FastAPI(title="vate", docs_url=None, redoc_url=None, openapi_url=None)
    state = ServiceState()
    pipeline = components.pipeline
    dialogue = components.dialogue
    problems = components.problems
    pool = components.pool

    @app.exception_handler(ApiFault)
    async def _fault_handler(_request: Request, fault: ApiFault):
        return JSONResponse(status_code=fault.status, content=fault.body())

    def check_auth(request: Request) -> None:
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise ApiFault(401, "BadRequest", "missing or invalid bearer token")

    def record_attempt(student_id: str, problem_id: str, correct: bool) -> None:
        problem = problems.get(problem_id)
        now = _now_ms()
        with state.lock:
            for kp in problem.knowledge_point_ids:
                state.events.append(
                    LearningEvent(
                        student_id=student_id,
                        session_ref=f"student:{student_id}",
                        kind=EventKind.ATTEMPT,
                        at=now,
                        problem_id=problem_id,
                        knowledge_point_id=kp,
                        correct=correct,
                    )
                )

    def student_events(student_id: str) -> list[LearningEvent]:
        ref = f"student:{student_id}"
        with state.lock:
            return [e for e in state.events if e.session_ref == ref]

    @app.get("/v1/health")
    async def health():
        return {"status": "ok"}

    @app.post("/v1/submissions")
    async def submit(request: Request):
        check_auth(request)
        body = await _json_body(request)
        idem_key = request.headers.get("idempotency-key")
        body_hash = hashlib.sha256(
            repr(sorted(body.items(), key=lambda kv: kv[0])).encode()
        ).hexdigest()
        if idem_key is not None:
            with state.lock:
                stored = state.idempotency.get(idem_key)
            if stored is not None:
                stored_hash, response = stored
                if stored_hash != body_hash:
                    raise _bad_request(
                        "Idempotency-Key reused with a different body"
                    )
                return response

        sub = StudentSubmission(
            submission_id=uuid.uuid4().hex,
            student_id=_require_str(body, "student_id"),
            problem_id=_require_str(body, "problem_id"),
            raw_answer=_require_str(body, "answer"),
            draft=_decode_draft(body),
            submitted_at=_now_ms(),
        )
        try:
            outcome = pipeline.handle_submission(sub)
        except UnknownProblem:
            raise ApiFault(
                404, "UnknownProblem", f"unknown problem {sub.problem_id!r}"
            ) from None
        except GatewayError as exc:
            raise ApiFault(503, "BackendUnavailable", str(exc)) from None

        if outcome.verdict is not Verdict.REDO_REQUESTED:
            record_attempt(
                sub.student_id,
                sub.problem_id,
                outcome.verdict is Verdict.CORRECT,
            )

        response: dict = {"verdict": outcome.verdict.value}
        if outcome.redo_reason is not None:
            response["redo_reason"] = outcome.redo_reason
        if outcome.analysis is not None:
            response["analysis"] = {
                "cause": outcome.analysis.cause,
                "suggestion": outcome.analysis.suggestion,
                "source": outcome.analysis.source.value,
            }
            response["session_id"] = outcome.session_id
        if idem_key is not None:
            with state.lock:
                state.idempotency[idem_key] = (body_hash, response)
        return response

    def resolve_session(session_id: str) -> DialogueSession:
        try:
            return dialogue.get(session_id)
        except UnknownSession:
            raise ApiFault(
                404, "BadRequest", f"unknown session {session_id!r}"
            ) from None

    @app.post("/v1/sessions/{session_id}/messages")
    async def post_message(session_id: str, request: Request):
        check_auth(request)
        body = await _json_body(request)
        text = _require_str(body, "text")
        session = resolve_session(session_id)
        try:
            turn = dialogue.next_tutor_turn(session, text)
        except SessionClosed:
            raise ApiFault(
                409, "SessionClosed", f"session {session_id!r} is closed"
            ) from None
        except GatewayError as exc:
            raise ApiFault(503, "BackendUnavailable", str(exc)) from None
        return _turn_repr(turn)

    @app.get("/v1/sessions/{session_id}")
    async def get_session(session_id: str, request: Request):
        check_auth(request)
        session = resolve_session(session_id)
        return {
            "session_id": session.session_id,
            "student_id": session.student_id,
            "problem_id": session.problem_id,
            "effective": session.effective,
            "closed": session.closed,
            "turns": [_turn_repr(t) for t in session.turns],
        }

    @app.get("/v1/sessions/{session_id}/summary")
    async def session_summary(session_id: str, request: Request):
        check_auth(request)
        session = resolve_session(session_id)
        metrics = session_metrics(student_events(session.student_id))
        per_kp = []
        for kp in session.problem.knowledge_point_ids:
            kp_metrics = metrics.kp(kp)
            per_kp.append(
                {
                    "knowledge_point_id": kp,
                    "niact": kp_metrics.niact,
                    "nqct": kp_metrics.nqct,
                    "arct": kp_metrics.arct,
                    "nvrs": kp_metrics.nvrs,
                }
            )
        return {
            "session_id": session.session_id,
            "student_id": session.student_id,
            "problem_id": session.problem_id,
            "effective": session.effective,
            "closed": session.closed,
            "study_duration_ms": max(
                session.last_activity_at - session.opened_at, 0
            ),
            "quality": _quality_repr(classify_dialogue_quality(session)),
            "per_kp": per_kp,
            "turn_count": len(session.turns),
        }

    @app.get("/v1/problems/{problem_id}")
    async def get_problem(problem_id: str, request: Request):
        check_auth(request)
        try:
            problem = problems.get(problem_id)
        except UnknownProblem:
            raise ApiFault(
                404, "UnknownProblem", f"unknown problem {problem_id!r}"
            ) from None
        # The solution, explanation, and correct answer stay server-side;
        # clients must never be able to display them pre-effectiveness.
        return {
            "problem_id": problem.problem_id,
            "statement": problem.statement,
            "knowledge_point_ids": list(problem.knowledge_point_ids),
        }

    @app.get("/v1/pool/stats")
    async def pool_stats(request: Request):
        check_auth(request)
        stats = pool.stats()
        return {
            "entries": len(pool),
            "per_problem_counts": dict(stats.per_problem_counts),
            "hits": stats.hits,
            "misses": stats.misses,
            "hit_rate": stats.hit_rate,
            "inserts": stats.inserts,
            "rejects_quality": stats.rejects_quality,
            "rejects_capacity": stats.rejects_capacity,
        }

    @app.post("/v1/events")
    async def post_event(request: Request):
        check_auth(request)
        body = await _json_body(request)
        kind = _require_str(body, "kind")
        student_id = _require_str(body, "student_id")
        kp = _require_str(body, "knowledge_point_id")
        ref = f"student:{student_id}"
        if kind == "relearn":
            event = LearningEvent(
                student_id=student_id,
                session_ref=ref,
                kind=EventKind.RELEARN,
                at=_now_ms(),
                knowledge_point_id=kp,
            )
            with state.lock:
                state.events.append(event)
            return {"recorded": "relearn"}
        if kind == "repeat_learning":
            count = body.get("count")
            if not isinstance(count, int) or count < 0:
                raise _bad_request("field 'count' must be a nonnegative integer")
            record = RepeatRecord(
                session_ref=ref, knowledge_point_id=kp, count=count
            )
            with state.lock:
                state.repeat_records.append(record)
            return {"recorded": "repeat_learning"}
        raise _bad_request("kind must be 'relearn' or 'repeat_learning'")

    def student_report_tuples():
        """One report tuple per student seen by this service instance."""
        with state.lock:
            refs = {e.session_ref for e in state.events}
            events_copy = list(state.events)
        by_ref: dict[str, list[LearningEvent]] = {ref: [] for ref in refs}
        for event in events_copy:
            by_ref[event.session_ref].append(event)
        tuples = []
        for ref, events in sorted(by_ref.items()):
            student_id = ref.removeprefix("student:")
            sessions = dialogue.sessions_for_student(student_id)
            chars = sum(s.student_char_count() for s in sessions)
            conversation = chars > 0
            effective = any(
                s.effective and s.student_char_count() > 0 for s in sessions
            )
            quality = DialogueQuality(
                bucket=bucket_for(chars, has_student_turns=conversation),
                student_char_count=chars,
            )
            tuples.append((ref, session_metrics(events), conversation, effective, quality))
        return tuples

    @app.get("/v1/metrics/report")
    async def metrics_report(request: Request):
        check_auth(request)
        group = request.query_params.get("group", "outcomes")
        tuples = student_report_tuples()
        if group == "outcomes":
            report = group_report(
                (metrics, conversation, effective)
                for _ref, metrics, conversation, effective, _q in tuples
            )
        elif group == "repeat":
            with state.lock:
                repeats = list(state.repeat_records)
            by_ref = {ref: (c, e, q) for ref, _m, c, e, q in tuples}
            entries = []
            for record in repeats:
                conversation, effective, quality = by_ref.get(
                    record.session_ref,
                    (False, False, DialogueQuality(bucket=bucket_for(0, False), student_char_count=0)),
                )
                entries.append((record.count, conversation, effective, quality))
            report = repeat_learning_report(entries)
        else:
            raise _bad_request("group must be 'outcomes' or 'repeat'")
        return _report_repr(report)

    @app.post("/v1/ablation/judgments")
    async def post_judgment(request: Request):
        check_auth(request)
        body = await _json_body(request)
        record_id = _require_str(body, "record_id")
        try:
            ablated = AblatedElement(_require_str(body, "ablated"))
            winner = Winner(_require_str(body, "winner"))
        except ValueError:
            raise _bad_request(
                "ablated must be one of draft|problem|solution|answer;"
                " winner must be full|ablated"
            ) from None
        judgment = AblationJudgment(
            record_id=record_id, ablated=ablated, winner=winner
        )
        with state.lock:
            key = (record_id, ablated)
            if key in state.judgment_keys:
                raise _bad_request(
                    f"duplicate judgment for record {record_id!r} / {ablated.value}"
                )
            state.judgment_keys.add(key)
            state.judgments.append(judgment)
        return {"recorded": len(state.judgments)}

    @app.get("/v1/ablation/winrates")
    async def winrates(request: Request):
        check_auth(request)
        with state.lock:
            judgments = list(state.judgments)
        try:
            rates = win_rate(judgments)
        except DuplicateJudgment as exc:  # unreachable; inserts are guarded
            raise _bad_request(str(exc)) from None
        return {
            "win_rates": {element.value: rate for element, rate in rates.items()},
            "judgment_count": len(judgments),
        }

    return app
