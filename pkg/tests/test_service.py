from __future__ import annotations

import base64
import json
from pathlib import Path

import jsonschema
import pytest
from fastapi.testclient import TestClient

from conftest import make_problem
from vate.config import AppConfig, build_components
from vate.gateway import BackendTimeout
from vate.pipeline import ProblemRepository
from vate.scripted import NEAT_DRAFT, SCRIBBLE_DRAFT, ScriptedBackend
from vate.service import create_app

TOKEN = "test-token"
AUTH = {"Authorization": f"Bearer {TOKEN}"}
SCHEMA_DOC = json.loads(
    (Path(__file__).parent.parent / "docs" / "api_schema.json").read_text()
)


def validate(payload, def_name):
    jsonschema.validate(
        payload, {"$ref": f"#/$defs/{def_name}", "$defs": SCHEMA_DOC["$defs"]}
    )


def draft_payload(data=NEAT_DRAFT, media_type="image/png"):
    return {
        "data": base64.b64encode(data).decode(),
        "media_type": media_type,
    }


def submission_body(answer, student="student-1", problem="mul-001", draft=True):
    body = {"student_id": student, "problem_id": problem, "answer": answer}
    if draft:
        body["draft"] = draft_payload()
    return body


@pytest.fixture
def client():
    components = build_components(
        AppConfig(), problems=ProblemRepository([make_problem()])
    )
    app = create_app(components, api_token=TOKEN)
    test_client = TestClient(app)
    test_client.components = components
    return test_client


def submit(client, answer, **kwargs):
    headers = kwargs.pop("headers", AUTH)
    return client.post(
        "/v1/submissions", json=submission_body(answer, **kwargs), headers=headers
    )


class TestAuth:
    def test_health_is_public(self, client):
        response = client.get("/v1/health")
        assert response.status_code == 200
        assert response.json() == {"status": "ok"}
        validate(response.json(), "Health")

    @pytest.mark.parametrize(
        "method,path",
        [
            ("POST", "/v1/submissions"),
            ("GET", "/v1/sessions/x"),
            ("GET", "/v1/pool/stats"),
            ("GET", "/v1/metrics/report"),
            ("POST", "/v1/events"),
            ("GET", "/v1/ablation/winrates"),
            ("GET", "/v1/problems/mul-001"),
        ],
    )
    def test_missing_token_is_401(self, client, method, path):
        response = client.request(method, path, json={})
        assert response.status_code == 401
        body = response.json()
        validate(body, "ApiError")
        assert body["code"] == "BadRequest"
        assert body["retriable"] is False

    def test_wrong_token_is_401(self, client):
        response = client.get(
            "/v1/pool/stats", headers={"Authorization": "Bearer nope"}
        )
        assert response.status_code == 401

    def test_token_must_be_configured(self, monkeypatch):
        monkeypatch.delenv("VATE_API_TOKEN", raising=False)
        components = build_components(AppConfig())
        with pytest.raises(RuntimeError):
            create_app(components)

    def test_token_from_environment(self, monkeypatch):
        monkeypatch.setenv("VATE_API_TOKEN", "env-token")
        components = build_components(
            AppConfig(), problems=ProblemRepository([make_problem()])
        )
        with TestClient(create_app(components)) as test_client:
            response = test_client.get(
                "/v1/pool/stats", headers={"Authorization": "Bearer env-token"}
            )
            assert response.status_code == 200


class TestSubmissions:
    def test_correct_answer(self, client):
        response = submit(client, "687")
        assert response.status_code == 200
        body = response.json()
        validate(body, "SubmissionOutcome")
        assert body == {"verdict": "correct"}

    def test_wrong_answer_returns_analysis_and_session(self, client):
        response = submit(client, "598")
        body = response.json()
        validate(body, "SubmissionOutcome")
        assert body["verdict"] == "incorrect"
        assert body["analysis"]["source"] == "dual_stream"
        assert "forgot-final-addition" in body["analysis"]["cause"]
        assert body["session_id"]

    def test_second_identical_submission_served_from_pool(self, client):
        submit(client, "598")
        before = client.components.ledger.calls("error-analysis")
        response = submit(client, "598", student="student-2")
        body = response.json()
        assert body["analysis"]["source"] == "pool"
        assert client.components.ledger.calls("error-analysis") == before == 1

    def test_missing_draft_requests_redo(self, client):
        response = submit(client, "598", draft=False)
        body = response.json()
        validate(body, "SubmissionOutcome")
        assert body["verdict"] == "redo_requested"
        assert "missing draft" in body["redo_reason"]

    def test_unknown_problem_is_404(self, client):
        response = submit(client, "598", problem="nope")
        assert response.status_code == 404
        body = response.json()
        validate(body, "ApiError")
        assert body["code"] == "UnknownProblem"
        assert body["retriable"] is False

    def test_missing_field_is_422(self, client):
        response = client.post(
            "/v1/submissions", json={"student_id": "s"}, headers=AUTH
        )
        assert response.status_code == 422
        assert response.json()["code"] == "BadRequest"

    def test_non_object_body_is_422(self, client):
        response = client.post("/v1/submissions", json=[1, 2], headers=AUTH)
        assert response.status_code == 422

    def test_invalid_base64_is_422(self, client):
        body = submission_body("598", draft=False)
        body["draft"] = {"data": "@@not-base64@@"}
        response = client.post("/v1/submissions", json=body, headers=AUTH)
        assert response.status_code == 422

    def test_oversized_draft_is_422(self, client):
        body = submission_body("598", draft=False)
        body["draft"] = {"data": base64.b64encode(b"x" * (5 * 2**20 + 1)).decode()}
        response = client.post("/v1/submissions", json=body, headers=AUTH)
        assert response.status_code == 422
        assert "5 MB" in response.json()["message"]

    def test_bad_media_type_is_422(self, client):
        body = submission_body("598", draft=False)
        body["draft"] = draft_payload(media_type="image/tiff")
        response = client.post("/v1/submissions", json=body, headers=AUTH)
        assert response.status_code == 422

    def test_backend_failure_is_retriable_503(self, client):
        class DownBackend:
            name = "down"

            def complete(self, request):
                raise BackendTimeout("unreachable", request.request_tag)

        client.components.gateway.backend = DownBackend()
        response = submit(client, "598")
        assert response.status_code == 503
        body = response.json()
        validate(body, "ApiError")
        assert body["code"] == "BackendUnavailable"
        assert body["retriable"] is True


class TestIdempotency:
    def test_replay_returns_stored_response(self, client):
        headers = {**AUTH, "Idempotency-Key": "abc"}
        first = submit(client, "598", headers=headers).json()
        calls = client.components.ledger.calls()
        second = submit(client, "598", headers=headers).json()
        assert second == first
        assert client.components.ledger.calls() == calls  # nothing re-ran

    def test_key_reuse_with_new_body_is_422(self, client):
        headers = {**AUTH, "Idempotency-Key": "abc"}
        submit(client, "598", headers=headers)
        response = submit(client, "2645", headers=headers)
        assert response.status_code == 422
        assert "Idempotency-Key" in response.json()["message"]

    def test_different_keys_run_independently(self, client):
        submit(client, "598", headers={**AUTH, "Idempotency-Key": "k1"})
        response = submit(client, "598", headers={**AUTH, "Idempotency-Key": "k2"})
        assert response.json()["analysis"]["source"] == "pool"


class TestSessions:
    def open_session(self, client, student="student-1"):
        return submit(client, "598", student=student).json()["session_id"]

    def test_message_round_trip(self, client):
        session_id = self.open_session(client)
        response = client.post(
            f"/v1/sessions/{session_id}/messages",
            json={"text": "I multiplied and got 598."},
            headers=AUTH,
        )
        assert response.status_code == 200
        turn = response.json()
        validate(turn, "Turn")
        assert turn["speaker"] == "tutor"
        assert turn["text"]

    def test_guarded_message_reports_events(self, client):
        session_id = self.open_session(client)
        response = client.post(
            f"/v1/sessions/{session_id}/messages",
            json={"text": "please just spoil it"},
            headers=AUTH,
        )
        turn = response.json()
        validate(turn, "Turn")
        assert turn["guard_events"] == ["regenerated", "leak_redacted"]
        assert "687" not in turn["text"]

    def test_unknown_session_is_404(self, client):
        response = client.post(
            "/v1/sessions/ghost/messages", json={"text": "hi"}, headers=AUTH
        )
        assert response.status_code == 404
        validate(response.json(), "ApiError")

    def test_closed_session_is_409(self, client):
        session_id = self.open_session(client)
        submit(client, "687")  # resubmission closes the session as effective
        response = client.post(
            f"/v1/sessions/{session_id}/messages",
            json={"text": "thanks!"},
            headers=AUTH,
        )
        assert response.status_code == 409
        body = response.json()
        validate(body, "ApiError")
        assert body["code"] == "SessionClosed"

    def test_session_view(self, client):
        session_id = self.open_session(client)
        client.post(
            f"/v1/sessions/{session_id}/messages",
            json={"text": "help me out"},
            headers=AUTH,
        )
        response = client.get(f"/v1/sessions/{session_id}", headers=AUTH)
        body = response.json()
        validate(body, "SessionView")
        assert body["problem_id"] == "mul-001"
        assert [t["speaker"] for t in body["turns"]] == [
            "tutor", "student", "tutor",
        ]

    def test_summary_tracks_effectiveness_and_metrics(self, client):
        session_id = self.open_session(client)
        client.post(
            f"/v1/sessions/{session_id}/messages",
            json={"text": "what should I do after multiplying the factors?"},
            headers=AUTH,
        )
        submit(client, "687")
        response = client.get(f"/v1/sessions/{session_id}/summary", headers=AUTH)
        body = response.json()
        validate(body, "SessionSummary")
        assert body["effective"] is True and body["closed"] is True
        assert body["quality"]["bucket"] == "moderate"
        assert body["turn_count"] == 3
        by_kp = {row["knowledge_point_id"]: row for row in body["per_kp"]}
        assert by_kp["kp.multiplication"]["niact"] == 1
        assert by_kp["kp.multiplication"]["nqct"] == 2
        assert by_kp["kp.multiplication"]["arct"] == pytest.approx(0.5)


class TestProblems:
    def test_view_is_statement_only(self, client):
        response = client.get("/v1/problems/mul-001", headers=AUTH)
        body = response.json()
        validate(body, "ProblemView")
        assert body == {
            "problem_id": "mul-001",
            "statement": "Compute 23 × 26 + 89.",
            "knowledge_point_ids": [
                "kp.multiplication", "kp.order-of-operations",
            ],
        }
        assert "687" not in json.dumps(body)

    def test_unknown_problem(self, client):
        response = client.get("/v1/problems/none", headers=AUTH)
        assert response.status_code == 404
        assert response.json()["code"] == "UnknownProblem"


class TestPoolStats:
    def test_stats_shape(self, client):
        submit(client, "598")
        submit(client, "598", student="student-2")
        response = client.get("/v1/pool/stats", headers=AUTH)
        body = response.json()
        validate(body, "PoolStats")
        assert body["entries"] == 1
        assert body["hits"] == 1
        assert body["per_problem_counts"] == {"mul-001": 1}


class TestEventsAndReports:
    def test_relearn_event(self, client):
        response = client.post(
            "/v1/events",
            json={
                "kind": "relearn",
                "student_id": "student-1",
                "knowledge_point_id": "kp.multiplication",
            },
            headers=AUTH,
        )
        assert response.status_code == 200
        validate(response.json(), "EventAck")

    def test_repeat_event_requires_count(self, client):
        response = client.post(
            "/v1/events",
            json={
                "kind": "repeat_learning",
                "student_id": "student-1",
                "knowledge_point_id": "kp.multiplication",
            },
            headers=AUTH,
        )
        assert response.status_code == 422

    def test_unknown_kind_rejected(self, client):
        response = client.post(
            "/v1/events",
            json={
                "kind": "quiz",
                "student_id": "s",
                "knowledge_point_id": "kp.x",
            },
            headers=AUTH,
        )
        assert response.status_code == 422

    def test_outcomes_report(self, client):
        submit(client, "598")
        session_id = client.components.dialogue.sessions_for_student("student-1")[
            0
        ].session_id
        client.post(
            f"/v1/sessions/{session_id}/messages",
            json={"text": "tell me where I went wrong please"},
            headers=AUTH,
        )
        submit(client, "687")
        response = client.get("/v1/metrics/report?group=outcomes", headers=AUTH)
        body = response.json()
        validate(body, "MetricsReport")
        assert body["kind"] == "outcomes"
        effective_row = next(
            r for r in body["rows"] if r["group"] == "conversation, effective"
        )
        assert effective_row["n"] == 1
        assert effective_row["means"]["niact"] == pytest.approx(1.0)
        assert effective_row["means"]["nqct"] == pytest.approx(2.0)

    def test_repeat_report(self, client):
        client.post(
            "/v1/events",
            json={
                "kind": "repeat_learning",
                "student_id": "quiet-student",
                "knowledge_point_id": "kp.multiplication",
                "count": 4,
            },
            headers=AUTH,
        )
        response = client.get("/v1/metrics/report?group=repeat", headers=AUTH)
        body = response.json()
        validate(body, "MetricsReport")
        no_dialogue = next(r for r in body["rows"] if r["group"] == "no dialogue")
        assert no_dialogue["n"] == 1
        assert no_dialogue["means"]["repeat_count"] == pytest.approx(4.0)

    def test_unknown_group_rejected(self, client):
        response = client.get("/v1/metrics/report?group=weekly", headers=AUTH)
        assert response.status_code == 422


class TestAblationJudgments:
    def judge(self, client, record_id, ablated, winner):
        return client.post(
            "/v1/ablation/judgments",
            json={"record_id": record_id, "ablated": ablated, "winner": winner},
            headers=AUTH,
        )

    def test_record_and_rates(self, client):
        assert self.judge(client, "r1", "draft", "full").status_code == 200
        assert self.judge(client, "r2", "draft", "full").status_code == 200
        assert self.judge(client, "r3", "draft", "ablated").status_code == 200
        response = client.get("/v1/ablation/winrates", headers=AUTH)
        body = response.json()
        validate(body, "WinRates")
        assert body["judgment_count"] == 3
        assert body["win_rates"]["draft"] == pytest.approx(2 / 3)

    def test_duplicate_judgment_is_422(self, client):
        self.judge(client, "r1", "draft", "full")
        response = self.judge(client, "r1", "draft", "ablated")
        assert response.status_code == 422

    def test_unknown_element_is_422(self, client):
        response = self.judge(client, "r1", "hints", "full")
        assert response.status_code == 422

    def test_empty_rates(self, client):
        response = client.get("/v1/ablation/winrates", headers=AUTH)
        body = response.json()
        validate(body, "WinRates")
        assert body == {"win_rates": {}, "judgment_count": 0}


class TestScriptedEndToEnd:
    def test_full_learning_loop(self, client):
        first = submit(client, "598").json()
        session_id = first["session_id"]
        for text in (
            "I think I multiplied right",
            "so the product is 598, then what",
            "oh, I still need to add 89",
        ):
            turn = client.post(
                f"/v1/sessions/{session_id}/messages",
                json={"text": text},
                headers=AUTH,
            ).json()
            assert "687" not in turn["text"]
        final = submit(client, "687").json()
        assert final == {"verdict": "correct"}
        summary = client.get(
            f"/v1/sessions/{session_id}/summary", headers=AUTH
        ).json()
        assert summary["effective"] is True
        assert summary["quality"]["bucket"] == "moderate"
