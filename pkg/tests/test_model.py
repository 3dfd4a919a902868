from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from vate.model import (
    AnalysisSource,
    DraftImage,
    ErrorCauseAnalysis,
    NormalizedAnswer,
    Problem,
    StudentSubmission,
    answers_equal,
    normalize_answer,
)

from conftest import make_problem


class TestNormalizeAnswer:
    def test_whitespace_collapses(self):
        assert normalize_answer("  598 ").canonical == "598"
        assert normalize_answer("x =\t 598\n").canonical == "x = 598"

    def test_case_folds(self):
        assert normalize_answer("X = 5").canonical == "x = 5"

    def test_thousands_commas_dropped(self):
        assert normalize_answer("1,234").canonical == "1234"
        assert normalize_answer("12,345,678").canonical == "12345678"

    def test_non_grouping_comma_kept(self):
        assert normalize_answer("1,2").canonical == "1,2"

    def test_leading_zeros_and_plus_sign(self):
        assert normalize_answer("0598").canonical == "598"
        assert normalize_answer("+598").canonical == "598"

    def test_trailing_decimal_zeros(self):
        assert normalize_answer("598.0").canonical == "598"
        assert normalize_answer("598.50").canonical == "598.5"

    def test_negative_preserved(self):
        assert normalize_answer("-3").canonical == "-3"
        assert answers_equal("-3", "3") is False

    @given(st.text(max_size=40))
    def test_idempotent(self, raw):
        once = normalize_answer(raw).canonical
        assert normalize_answer(once).canonical == once

    @given(st.integers(min_value=-(10**12), max_value=10**12))
    def test_integers_survive(self, n):
        assert normalize_answer(str(n)).canonical == str(n)

    def test_answers_equal(self):
        assert answers_equal(" 687", "687.0")
        assert answers_equal("1,234", "1234")
        assert not answers_equal("687", "6870")


class TestProblem:
    def test_valid(self):
        problem = make_problem()
        assert problem.knowledge_point_ids == (
            "kp.multiplication",
            "kp.order-of-operations",
        )

    @pytest.mark.parametrize(
        "field", ["problem_id", "statement", "solution", "explanation", "correct_answer"]
    )
    def test_empty_fields_rejected(self, field):
        with pytest.raises(ValueError):
            make_problem(**{field: ""})

    def test_needs_knowledge_point(self):
        with pytest.raises(ValueError):
            make_problem(knowledge_point_ids=())


class TestDraftImage:
    def test_byte_length(self):
        image = DraftImage(data=b"x" * 150, media_type="image/png")
        assert image.byte_length == 150

    def test_media_type_checked(self):
        with pytest.raises(ValueError):
            DraftImage(data=b"x" * 150, media_type="image/gif")

    def test_empty_data_rejected(self):
        with pytest.raises(ValueError):
            DraftImage(data=b"", media_type="image/png")


class TestStudentSubmission:
    def test_empty_answer_requires_draft(self):
        with pytest.raises(ValueError):
            StudentSubmission(
                submission_id="s",
                student_id="stu",
                problem_id="p",
                raw_answer="",
                draft=None,
            )

    def test_empty_answer_with_draft_ok(self):
        sub = StudentSubmission(
            submission_id="s",
            student_id="stu",
            problem_id="p",
            raw_answer="",
            draft=DraftImage(data=b"y" * 200, media_type="image/png"),
        )
        assert sub.raw_answer == ""


class TestErrorCauseAnalysis:
    def test_pool_source_forbids_backend_name(self):
        with pytest.raises(ValueError):
            ErrorCauseAnalysis(
                cause="c",
                suggestion="s",
                source=AnalysisSource.POOL,
                backend_name="scripted",
            )

    def test_nonempty_fields(self):
        with pytest.raises(ValueError):
            ErrorCauseAnalysis(
                cause="", suggestion="s", source=AnalysisSource.DUAL_STREAM
            )

    def test_normalized_answer_roundtrip(self):
        answer = NormalizedAnswer(canonical="598")
        assert answer.canonical == "598"
