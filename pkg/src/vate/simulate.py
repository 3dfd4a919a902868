"""Synthetic long-tail workload driving the real submission pipeline.

Wrong answers in the wild concentrate into few categories per problem, so
caching their analyses pays for itself quickly. The simulator models that
concentration with a Zipf distribution over answer categories, feeds the
resulting stream through handle_submission against the scripted backend,
and reports what the cache actually saved: backend calls made, hits
served, and how much of the traffic the top 40 categories covered.

Runs are bit-reproducible given the seed (single-threaded mode). The
concurrent mode exists only to stress the pool's race invariants; it
keeps the call bound but gives up reproducibility.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dialogue import DialogueEngine
from .gateway import LlmGateway, UsageLedger
from .model import DraftImage, Problem, StudentSubmission
from .pipeline import AnalysisPipeline, ERROR_STAGE_TAG, ProblemRepository, Verdict
from .pool import ErrorPool
from .scripted import ScriptedBackend

TOP_CATEGORY_WINDOW = 40

# Two fixed payloads mark whether the injected quality score should pass;
# encoding it in the draft keeps the scorer pure under concurrency.
_PASS_DRAFT = DraftImage(
    data=b"simulated scratch work (quality pass) " * 4, media_type="image/png"
)
_FAIL_DRAFT = DraftImage(
    data=b"simulated scratch work (quality fail) " * 4, media_type="image/png"
)


def _injected_quality(draft: DraftImage) -> float:
    return 1.0 if draft.data == _PASS_DRAFT.data else 0.0


@dataclass(frozen=True)
class SimConfig:
    n_problems: int
    distinct_answers_per_problem: int
    zipf_exponent: float
    n_submissions: int
    quality_pass_prob: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_problems < 1:
            raise ValueError("n_problems must be >= 1")
        if self.distinct_answers_per_problem < 1:
            raise ValueError("distinct_answers_per_problem must be >= 1")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf_exponent must be > 0")
        if self.n_submissions < 1:
            raise ValueError("n_submissions must be >= 1")
        if not 0.0 <= self.quality_pass_prob <= 1.0:
            raise ValueError("quality_pass_prob must be in [0, 1]")


@dataclass(frozen=True)
class SavingsReport:
    backend_calls: int
    cache_hits: int
    hit_rate: float
    per_problem_distinct_seen: tuple[int, ...]
    bound_nk: int
    top40_coverage: float


@lru_cache(maxsize=32)
def _zipf_cdf(exponent: float, distinct: int) -> np.ndarray:
    weights = np.arange(1, distinct + 1, dtype=np.float64) ** -exponent
    return np.cumsum(weights / weights.sum())


def zipf_probability(exponent: float, distinct: int, index: int) -> float:
    """Exact category probability; used as the oracle for sampler tests."""
    if not 1 <= index <= distinct:
        raise ValueError("index out of range")
    weights = np.arange(1, distinct + 1, dtype=np.float64) ** -exponent
    return float(weights[index - 1] / weights.sum())


def sample_answer(
    zipf_exponent: float, distinct: int, rng: np.random.Generator
) -> int:
    """Draw one answer-category index in [1, distinct]."""
    if distinct < 1:
        raise ValueError("distinct must be >= 1")
    cdf = _zipf_cdf(zipf_exponent, distinct)
    return int(np.searchsorted(cdf, rng.random(), side="right")) + 1


def sample_answers(
    zipf_exponent: float, distinct: int, rng: np.random.Generator, n: int
) -> np.ndarray:
    cdf = _zipf_cdf(zipf_exponent, distinct)
    return np.searchsorted(cdf, rng.random(n), side="right") + 1


def synthetic_problems(n: int) -> list[Problem]:
    """Product-plus-constant problems the scripted backend can diagnose."""
    problems = []
    for i in range(n):
        a, b, c = 11 + i, 17 + 2 * i, 31 + 3 * i
        problems.append(
            Problem(
                problem_id=f"sim-{i:04d}",
                statement=f"Compute {a} × {b} + {c}.",
                solution=f"{a} × {b} = {a * b}, then {a * b} + {c} = {a * b + c}.",
                explanation="Multiply first, then add the constant term.",
                correct_answer=str(a * b + c),
                knowledge_point_ids=("kp.multiplication", "kp.order-of-operations"),
            )
        )
    return problems


def run_cost_sim(cfg: SimConfig, concurrency: int = 1) -> SavingsReport:
    """Replay a synthetic wrong-answer stream and account for every call."""
    rng = np.random.default_rng(cfg.seed)
    problems = synthetic_problems(cfg.n_problems)
    correct = [int(p.correct_answer) for p in problems]

    problem_idx = rng.integers(0, cfg.n_problems, size=cfg.n_submissions)
    categories = sample_answers(
        cfg.zipf_exponent,
        cfg.distinct_answers_per_problem,
        rng,
        cfg.n_submissions,
    )
    quality_pass = rng.random(cfg.n_submissions) < cfg.quality_pass_prob

    ledger = UsageLedger()
    gateway = LlmGateway(ScriptedBackend(), ledger=ledger, max_in_flight=64)
    pool = ErrorPool()
    dialogue = DialogueEngine(gateway)
    pipeline = AnalysisPipeline(
        ProblemRepository(problems),
        gateway,
        pool,
        dialogue,
        quality_scorer=_injected_quality,
    )

    def one(j: int) -> None:
        i = int(problem_idx[j])
        category = int(categories[j])
        sub = StudentSubmission(
            submission_id=f"sim-sub-{j}",
            student_id=f"sim-student-{j}",
            problem_id=problems[i].problem_id,
            raw_answer=str(correct[i] + category),
            draft=_PASS_DRAFT if quality_pass[j] else _FAIL_DRAFT,
        )
        outcome = pipeline.handle_submission(sub)
        assert outcome.verdict is Verdict.INCORRECT

    if concurrency <= 1:
        for j in range(cfg.n_submissions):
            one(j)
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as executor:
            list(executor.map(one, range(cfg.n_submissions)))

    seen: dict[int, set[int]] = {}
    for j in range(cfg.n_submissions):
        seen.setdefault(int(problem_idx[j]), set()).add(int(categories[j]))
    distinct_seen = tuple(len(seen.get(i, ())) for i in range(cfg.n_problems))

    stats = pool.stats()
    backend_calls = ledger.calls(ERROR_STAGE_TAG)
    lookups = stats.hits + stats.misses
    return SavingsReport(
        backend_calls=backend_calls,
        cache_hits=stats.hits,
        hit_rate=stats.hits / lookups if lookups else 0.0,
        per_problem_distinct_seen=distinct_seen,
        bound_nk=cfg.n_problems * cfg.distinct_answers_per_problem,
        top40_coverage=float(np.mean(categories <= TOP_CATEGORY_WINDOW)),
    )


def render_savings_table(cfg: SimConfig, report: SavingsReport) -> str:
    lines = [
        ("submissions", cfg.n_submissions),
        ("problems", cfg.n_problems),
        ("distinct answers per problem", cfg.distinct_answers_per_problem),
        ("zipf exponent", cfg.zipf_exponent),
        ("quality pass probability", cfg.quality_pass_prob),
        ("seed", cfg.seed),
        ("backend error-analysis calls", report.backend_calls),
        ("cache hits", report.cache_hits),
        ("hit rate", f"{report.hit_rate:.4f}"),
        ("dedup bound (N x K)", report.bound_nk),
        ("top-40 category coverage", f"{report.top40_coverage:.4f}"),
    ]
    width = max(len(name) for name, _ in lines)
    return "\n".join(f"{name.ljust(width)}  {value}" for name, value in lines)
