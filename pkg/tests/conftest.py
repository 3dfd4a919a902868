from __future__ import annotations

import pytest

from vate.config import AppConfig, Components, build_components
from vate.model import DraftImage, Problem, StudentSubmission
from vate.pipeline import ProblemRepository
from vate.scripted import NEAT_DRAFT, SCRIBBLE_DRAFT


def make_problem(**overrides) -> Problem:
    base = dict(
        problem_id="mul-001",
        statement="Compute 23 × 26 + 89.",
        solution="23 × 26 = 598, then 598 + 89 = 687.",
        explanation="Multiply the two factors first, then add the constant.",
        correct_answer="687",
        knowledge_point_ids=("kp.multiplication", "kp.order-of-operations"),
    )
    base.update(overrides)
    return Problem(**base)


def make_submission(
    answer: str,
    student_id: str = "student-1",
    problem_id: str = "mul-001",
    draft: DraftImage | None = "neat",
    submission_id: str | None = None,
) -> StudentSubmission:
    if draft == "neat":
        draft = DraftImage(data=NEAT_DRAFT, media_type="image/png")
    return StudentSubmission(
        submission_id=submission_id or f"sub-{student_id}-{answer}",
        student_id=student_id,
        problem_id=problem_id,
        raw_answer=answer,
        draft=draft,
    )


@pytest.fixture
def problem() -> Problem:
    return make_problem()


@pytest.fixture
def neat_draft() -> DraftImage:
    return DraftImage(data=NEAT_DRAFT, media_type="image/png")


@pytest.fixture
def scribble_draft() -> DraftImage:
    return DraftImage(data=SCRIBBLE_DRAFT, media_type="image/png")


@pytest.fixture
def components(problem) -> Components:
    return build_components(
        AppConfig(), problems=ProblemRepository([problem])
    )
