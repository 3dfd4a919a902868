"""Uniform backend abstraction for text and multimodal model calls.

A backend is anything with a ``name`` and a ``complete(request)`` method.
The :class:`LlmGateway` wraps one backend, bounds in-flight calls, and
records every successful response in a :class:`UsageLedger` under the
request's stage tag, which gives per-stage cost reporting for free.

Stage tags in use across the system:

* ``draft-analysis`` - multimodal calls (draft summarization and draft
  quality scoring both run on the multimodal model).
* ``error-analysis`` - the text-model error-cause call.
* ``dialogue`` - tutor-turn generation.
"""

from __future__ import annotations

import base64
import os
import threading
import time
from dataclasses import dataclass, replace
from typing import Protocol, runtime_checkable

import httpx

from .model import DraftImage

MULTIMODAL_STAGE_TAGS = frozenset({"draft-analysis"})

API_KEY_ENV = "VATE_LLM_API_KEY"


class GatewayError(Exception):
    """Base class for backend call failures; carries the stage tag."""

    def __init__(self, message: str, stage: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class BackendTimeout(GatewayError):
    """Deadline exceeded or upstream unreachable."""


class BackendRejected(GatewayError):
    """Upstream returned a non-success status."""


class MalformedResponse(GatewayError):
    """Upstream payload (or model text) could not be parsed."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    request_tag: str
    image: DraftImage | None = None
    max_output_tokens: int = 512
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.image is not None and self.request_tag not in MULTIMODAL_STAGE_TAGS:
            raise ValueError(
                f"stage {self.request_tag!r} is text-only and cannot carry an image"
            )


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    input_tokens: int
    output_tokens: int
    latency_ms: int
    backend_name: str


@dataclass
class StageUsage:
    call_count: int = 0
    total_input_tokens: int = 0
    total_output_tokens: int = 0
    total_latency_ms: int = 0


class UsageLedger:
    """Per-stage call and token counters. Thread-safe."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._stages: dict[str, StageUsage] = {}

    def record(self, tag: str, response: CompletionResponse) -> None:
        with self._lock:
            usage = self._stages.setdefault(tag, StageUsage())
            usage.call_count += 1
            usage.total_input_tokens += response.input_tokens
            usage.total_output_tokens += response.output_tokens
            usage.total_latency_ms += response.latency_ms

    def calls(self, tag: str | None = None) -> int:
        with self._lock:
            if tag is not None:
                usage = self._stages.get(tag)
                return usage.call_count if usage else 0
            return sum(u.call_count for u in self._stages.values())

    def snapshot(self) -> dict[str, StageUsage]:
        with self._lock:
            return {tag: replace(u) for tag, u in self._stages.items()}


@runtime_checkable
class Backend(Protocol):
    name: str

    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


class LlmGateway:
    """One backend plus accounting and an in-flight bound.

    Only successful responses are recorded in the ledger, so ledger totals
    always equal the sum over delivered responses.
    """

    def __init__(
        self,
        backend: Backend,
        ledger: UsageLedger | None = None,
        max_in_flight: int = 8,
    ):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be at least 1")
        self.backend = backend
        self.ledger = ledger if ledger is not None else UsageLedger()
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._slots:
            response = self.backend.complete(request)
        if not response.text:
            raise MalformedResponse("backend returned empty text", request.request_tag)
        self.ledger.record(request.request_tag, response)
        return response


@dataclass
class HttpBackendConfig:
    endpoint: str
    model: str
    deadline_ms: int = 30000
    max_in_flight: int = 4


class HttpBackend:
    """Chat-completion style HTTP adapter.

    Wire format (documented here and nowhere else): the request body is
    ``{"model", "messages", "max_tokens", "temperature"}`` where each
    message is ``{"role", "content"}``; an attached image travels as an
    ``image_url`` content part with a base64 data URI. The response is
    expected to carry ``choices[0].message.content`` plus
    ``usage.prompt_tokens`` / ``usage.completion_tokens``.

    The API key is read from the ``VATE_LLM_API_KEY`` environment variable
    only; it never appears in config files or CLI flags. A timed-out call
    is retried exactly once, then surfaces as :class:`BackendTimeout`.
    Connection-level transport failures (unreachable or refused endpoint)
    are reported as :class:`BackendTimeout` as well, since both mean "the
    backend did not answer within the deadline".
    """

    def __init__(
        self,
        config: HttpBackendConfig,
        name: str | None = None,
        client: httpx.Client | None = None,
    ):
        self.config = config
        self.name = name or f"http:{config.model}"
        self._client = client or httpx.Client(
            timeout=config.deadline_ms / 1000.0
        )

    def _build_payload(self, request: CompletionRequest) -> dict:
        if request.image is not None:
            encoded = base64.b64encode(request.image.data).decode("ascii")
            content: object = [
                {"type": "text", "text": request.prompt},
                {
                    "type": "image_url",
                    "image_url": {
                        "url": f"data:{request.image.media_type};base64,{encoded}"
                    },
                },
            ]
        else:
            content = request.prompt
        return {
            "model": self.config.model,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        }

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        headers = {}
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = self._build_payload(request)

        started = time.monotonic()
        response: httpx.Response | None = None
        for attempt in range(2):
            try:
                response = self._client.post(
                    self.config.endpoint, json=payload, headers=headers
                )
                break
            except httpx.TimeoutException:
                if attempt == 1:
                    raise BackendTimeout(
                        f"no response within {self.config.deadline_ms} ms",
                        request.request_tag,
                    ) from None
            except httpx.TransportError as exc:
                raise BackendTimeout(
                    f"backend unreachable: {exc}", request.request_tag
                ) from None
        assert response is not None
        latency_ms = int((time.monotonic() - started) * 1000)

        if response.status_code // 100 != 2:
            raise BackendRejected(
                f"upstream status {response.status_code}", request.request_tag
            )
        try:
            body = response.json()
            text = body["choices"][0]["message"]["content"]
            usage = body.get("usage", {})
            input_tokens = int(usage.get("prompt_tokens", 0))
            output_tokens = int(usage.get("completion_tokens", 0))
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(
                f"unparseable upstream payload: {exc}", request.request_tag
            ) from None
        if not isinstance(text, str) or not text:
            raise MalformedResponse("empty completion text", request.request_tag)
        return CompletionResponse(
            text=text,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            latency_ms=latency_ms,
            backend_name=self.name,
        )
