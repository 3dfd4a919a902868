"""YAML configuration and component wiring for the service and CLI.

Keys mirror the deployment surface: where to listen, where the pool log
lives, which backend to talk to, and the gate / pool thresholds. Unknown
keys are rejected rather than ignored so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .dialogue import DEFAULT_IDLE_TIMEOUT_MS, DialogueEngine
from .draft import DEFAULT_MIN_DRAFT_BYTES
from .gateway import HttpBackend, HttpBackendConfig, LlmGateway, UsageLedger
from .pipeline import AnalysisPipeline, ProblemRepository
from .pool import DEFAULT_CAPACITY_PER_PROBLEM, DEFAULT_QUALITY_THRESHOLD, ErrorPool
from .scripted import ScriptedBackend

BACKEND_KINDS = ("scripted", "http")


@dataclass(frozen=True)
class ServerConfig:
    listen_addr: str = "127.0.0.1:8571"

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen_addr.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"listen_addr {self.listen_addr!r} is not host:port")
        return host, int(port)


@dataclass(frozen=True)
class PoolSettings:
    log_path: str | None = None
    quality_threshold: float = DEFAULT_QUALITY_THRESHOLD
    capacity: int = DEFAULT_CAPACITY_PER_PROBLEM


@dataclass(frozen=True)
class BackendSettings:
    kind: str = "scripted"
    endpoint: str = ""
    model: str = ""
    deadline_ms: int = 30000
    max_in_flight: int = 8

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"backend.kind must be one of {BACKEND_KINDS}")
        if self.kind == "http" and not (self.endpoint and self.model):
            raise ValueError("backend.kind http requires endpoint and model")


@dataclass(frozen=True)
class GateSettings:
    min_draft_bytes: int = DEFAULT_MIN_DRAFT_BYTES


@dataclass(frozen=True)
class DialogueSettings:
    idle_timeout_ms: int = DEFAULT_IDLE_TIMEOUT_MS


@dataclass(frozen=True)
class ProblemSettings:
    path: str | None = None


@dataclass(frozen=True)
class AppConfig:
    server: ServerConfig = field(default_factory=ServerConfig)
    pool: PoolSettings = field(default_factory=PoolSettings)
    backend: BackendSettings = field(default_factory=BackendSettings)
    gate: GateSettings = field(default_factory=GateSettings)
    dialogue: DialogueSettings = field(default_factory=DialogueSettings)
    problems: ProblemSettings = field(default_factory=ProblemSettings)


def _section(cls, mapping: dict, name: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown {name} config keys: {sorted(unknown)}")
    return cls(**mapping)


def load_config(path: str | Path | None) -> AppConfig:
    """Parse a YAML config file; None means all defaults."""
    if path is None:
        return AppConfig()
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ValueError("config root must be a mapping")
    sections = {
        "server": ServerConfig,
        "pool": PoolSettings,
        "backend": BackendSettings,
        "gate": GateSettings,
        "dialogue": DialogueSettings,
        "problems": ProblemSettings,
    }
    unknown = set(raw) - set(sections)
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    for name, cls in sections.items():
        section = raw.get(name, {})
        if not isinstance(section, dict):
            raise ValueError(f"config section {name!r} must be a mapping")
        kwargs[name] = _section(cls, section, name)
    return AppConfig(**kwargs)


@dataclass
class Components:
    """Everything one running service instance needs, wired together."""

    config: AppConfig
    problems: ProblemRepository
    ledger: UsageLedger
    gateway: LlmGateway
    pool: ErrorPool
    dialogue: DialogueEngine
    pipeline: AnalysisPipeline


def build_components(
    config: AppConfig, problems: ProblemRepository | None = None
) -> Components:
    if problems is None:
        if config.problems.path is not None:
            problems = ProblemRepository.from_ndjson(config.problems.path)
        else:
            problems = ProblemRepository()
    if config.backend.kind == "http":
        backend = HttpBackend(
            HttpBackendConfig(
                endpoint=config.backend.endpoint,
                model=config.backend.model,
                deadline_ms=config.backend.deadline_ms,
            )
        )
    else:
        backend = ScriptedBackend()
    ledger = UsageLedger()
    gateway = LlmGateway(
        backend, ledger=ledger, max_in_flight=config.backend.max_in_flight
    )
    pool = ErrorPool(
        log_path=config.pool.log_path,
        quality_threshold=config.pool.quality_threshold,
        capacity_per_problem=config.pool.capacity,
    )
    dialogue = DialogueEngine(
        gateway, idle_timeout_ms=config.dialogue.idle_timeout_ms
    )
    pipeline = AnalysisPipeline(
        problems,
        gateway,
        pool,
        dialogue,
        min_draft_bytes=config.gate.min_draft_bytes,
    )
    return Components(
        config=config,
        problems=problems,
        ledger=ledger,
        gateway=gateway,
        pool=pool,
        dialogue=dialogue,
        pipeline=pipeline,
    )
