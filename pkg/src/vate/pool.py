"""Bounded, quality-gated deduplication cache of error-cause analyses.

Keys are (problem id, normalized answer) pairs. Entries are immutable once
inserted and there is no eviction: at per-problem capacity, new keys are
still analyzed upstream but not cached, which keeps answers stable for the
high-frequency keys that dominate a long-tail workload.

Persistence is a line-delimited JSON append log. Field names are pinned in
docs/pool_log_format.md and must not change: problem_id, answer, cause,
suggestion, quality, created_at. On replay, a corrupt or truncated record
is skipped with a warning and everything before it is kept.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator

from .model import AnalysisSource, ErrorCauseAnalysis, NormalizedAnswer

logger = logging.getLogger(__name__)

POOL_RECORD_FIELDS = (
    "problem_id",
    "answer",
    "cause",
    "suggestion",
    "quality",
    "created_at",
)

DEFAULT_CAPACITY_PER_PROBLEM = 100
DEFAULT_QUALITY_THRESHOLD = 0.6


class StorageFailure(Exception):
    """The append log could not be written; the in-memory pool is intact."""


class InsertOutcome(Enum):
    INSERTED = "inserted"
    ALREADY_PRESENT = "already_present"
    REJECTED_QUALITY = "rejected_quality"
    REJECTED_CAPACITY = "rejected_capacity"


@dataclass(frozen=True)
class PoolKey:
    problem_id: str
    answer: NormalizedAnswer


@dataclass
class PoolEntry:
    key: PoolKey
    cause: str
    suggestion: str
    draft_quality: float
    created_at: int
    hit_count: int = 0

    def analysis(self) -> ErrorCauseAnalysis:
        """The cached analysis, tagged as pool-sourced."""
        return ErrorCauseAnalysis(
            cause=self.cause,
            suggestion=self.suggestion,
            source=AnalysisSource.POOL,
            backend_name=None,
        )


@dataclass(frozen=True)
class PoolStats:
    per_problem_counts: dict[str, int]
    hits: int
    misses: int
    inserts: int
    rejects_quality: int
    rejects_capacity: int

    @property
    def hit_rate(self) -> float:
        lookups = self.hits + self.misses
        return self.hits / lookups if lookups else 0.0


def _now_ms() -> int:
    return int(time.time() * 1000)


class ErrorPool:
    """Thread-safe capacity-bounded cache with optional append-log persistence."""

    def __init__(
        self,
        capacity_per_problem: int = DEFAULT_CAPACITY_PER_PROBLEM,
        quality_threshold: float = DEFAULT_QUALITY_THRESHOLD,
        log_path: str | Path | None = None,
        fsync: bool = False,
        clock=_now_ms,
    ):
        if capacity_per_problem < 1:
            raise ValueError("capacity_per_problem must be at least 1")
        self.capacity_per_problem = capacity_per_problem
        self.quality_threshold = quality_threshold
        self.log_path = Path(log_path) if log_path is not None else None
        self._fsync = fsync
        self._clock = clock
        self._lock = threading.Lock()
        self._entries: dict[PoolKey, PoolEntry] = {}
        self._per_problem: dict[str, int] = {}
        self._hits = 0
        self._misses = 0
        self._inserts = 0
        self._rejects_quality = 0
        self._rejects_capacity = 0
        if self.log_path is not None and self.log_path.exists():
            self._replay()

    # -- lookup / insert ------------------------------------------------

    def lookup(self, key: PoolKey) -> PoolEntry | None:
        with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                self._misses += 1
                return None
            entry.hit_count += 1
            self._hits += 1
            return entry

    def try_insert(
        self,
        key: PoolKey,
        analysis: ErrorCauseAnalysis,
        draft_quality: float,
        created_at: int | None = None,
    ) -> InsertOutcome:
        with self._lock:
            if key in self._entries:
                return InsertOutcome.ALREADY_PRESENT
            if draft_quality < self.quality_threshold:
                self._rejects_quality += 1
                return InsertOutcome.REJECTED_QUALITY
            if self._per_problem.get(key.problem_id, 0) >= self.capacity_per_problem:
                self._rejects_capacity += 1
                return InsertOutcome.REJECTED_CAPACITY
            entry = PoolEntry(
                key=key,
                cause=analysis.cause,
                suggestion=analysis.suggestion,
                draft_quality=draft_quality,
                created_at=created_at if created_at is not None else self._clock(),
            )
            self._entries[key] = entry
            self._per_problem[key.problem_id] = (
                self._per_problem.get(key.problem_id, 0) + 1
            )
            self._inserts += 1
            try:
                self.persist_append(entry)
            except StorageFailure as exc:
                # Pool stays usable in memory; operators see the failure.
                logger.error("pool append failed, entry kept in memory: %s", exc)
            return InsertOutcome.INSERTED

    # -- persistence -----------------------------------------------------

    def _record_for(self, entry: PoolEntry) -> dict:
        return {
            "problem_id": entry.key.problem_id,
            "answer": entry.key.answer.canonical,
            "cause": entry.cause,
            "suggestion": entry.suggestion,
            "quality": entry.draft_quality,
            "created_at": entry.created_at,
        }

    def persist_append(self, entry: PoolEntry) -> None:
        """Append one freshly inserted entry to the log."""
        if self.log_path is None:
            return
        line = json.dumps(self._record_for(entry), ensure_ascii=False)
        try:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                if self._fsync:
                    os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def _replay(self) -> None:
        assert self.log_path is not None
        with open(self.log_path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                    key = PoolKey(
                        problem_id=record["problem_id"],
                        answer=NormalizedAnswer(canonical=record["answer"]),
                    )
                    entry = PoolEntry(
                        key=key,
                        cause=record["cause"],
                        suggestion=record["suggestion"],
                        draft_quality=float(record["quality"]),
                        created_at=int(record["created_at"]),
                    )
                except (ValueError, KeyError, TypeError):
                    logger.warning(
                        "pool log %s line %d unreadable, skipped", self.log_path, lineno
                    )
                    continue
                if key in self._entries:
                    continue
                if self._per_problem.get(key.problem_id, 0) >= self.capacity_per_problem:
                    logger.warning(
                        "pool log %s line %d exceeds per-problem capacity, skipped",
                        self.log_path,
                        lineno,
                    )
                    continue
                self._entries[key] = entry
                self._per_problem[key.problem_id] = (
                    self._per_problem.get(key.problem_id, 0) + 1
                )

    # -- introspection ---------------------------------------------------

    def stats(self) -> PoolStats:
        with self._lock:
            return PoolStats(
                per_problem_counts=dict(self._per_problem),
                hits=self._hits,
                misses=self._misses,
                inserts=self._inserts,
                rejects_quality=self._rejects_quality,
                rejects_capacity=self._rejects_capacity,
            )

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def export_records(self) -> Iterator[dict]:
        """Entries in insertion order, in the pinned log record format."""
        with self._lock:
            entries = list(self._entries.values())
        for entry in entries:
            yield self._record_for(entry)

    def snapshot_entries(self) -> dict[PoolKey, tuple[str, str, float, int]]:
        """Persisted content per key; runtime hit counters excluded."""
        with self._lock:
            return {
                key: (e.cause, e.suggestion, e.draft_quality, e.created_at)
                for key, e in self._entries.items()
            }
