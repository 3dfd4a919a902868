#!/usr/bin/env python3
"""Walk one student through the full tutoring loop, printing each step.

Runs entirely against the scripted backend: wrong answer in, draft
analyzed, cause diagnosed, Socratic dialogue, correct resubmission,
session summary out. Useful as a smoke check and as a readable tour
of the pipeline's moving parts.
"""

from __future__ import annotations

from vate.config import AppConfig, build_components
from vate.dialogue import classify_dialogue_quality
from vate.model import DraftImage, Problem, StudentSubmission
from vate.pipeline import ProblemRepository
from vate.scripted import NEAT_DRAFT

PROBLEM = Problem(
    problem_id="mul-001",
    statement="Compute 23 × 26 + 89.",
    solution="23 × 26 = 598, then 598 + 89 = 687.",
    explanation="Multiply the two factors first, then add the constant.",
    correct_answer="687",
    knowledge_point_ids=("kp.multiplication", "kp.order-of-operations"),
)

CHAT = (
    "I multiplied 23 by 26 and stopped there.",
    "Oh, so the 598 was only part of it?",
    "Right, 598 plus 89... let me redo it.",
)


def submission(answer: str) -> StudentSubmission:
    return StudentSubmission(
        submission_id=f"demo-{answer}",
        student_id="demo-student",
        problem_id=PROBLEM.problem_id,
        raw_answer=answer,
        draft=DraftImage(data=NEAT_DRAFT, media_type="image/png"),
    )


def main() -> None:
    components = build_components(
        AppConfig(), problems=ProblemRepository([PROBLEM])
    )
    print(f"problem: {PROBLEM.statement}")

    wrong = components.pipeline.handle_submission(submission("598"))
    print(f"\nsubmitted 598 -> verdict {wrong.verdict.value}")
    print(f"  cause:      {wrong.analysis.cause}")
    print(f"  suggestion: {wrong.analysis.suggestion}")
    print(f"  source:     {wrong.analysis.source.value}")

    session = components.dialogue.get(wrong.session_id)
    print(f"\ntutor: {session.turns[-1].text}")
    for message in CHAT:
        print(f"student: {message}")
        turn = components.dialogue.next_tutor_turn(session, message)
        print(f"tutor: {turn.text}")

    right = components.pipeline.handle_submission(submission("687"))
    print(f"\nresubmitted 687 -> verdict {right.verdict.value}")

    quality = classify_dialogue_quality(session)
    print(
        f"session closed={session.closed} effective={session.effective}"
        f" bucket={quality.bucket.value}"
        f" student_chars={quality.student_char_count}"
    )
    print("\nbackend usage by stage:")
    for tag, usage in sorted(components.ledger.snapshot().items()):
        print(
            f"  {tag}: {usage.call_count} calls,"
            f" {usage.total_input_tokens}+{usage.total_output_tokens} tokens"
        )


if __name__ == "__main__":
    main()
